//! Sparse complex polynomial maps and real-valued polynomial Morse functions,
//! with analytic (Wirtinger) derivatives.
//!
//! Everything here is evaluated straight from the term lists. Finite
//! differences never appear in this module; tests use them as an oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type C64 = Complex64;

/// A point of `C^n`.
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalcError {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),
    #[error("invalid Morse function: {0}")]
    InvalidMorse(String),
}

/// Builds a point of `C^n` from `(re, im)` pairs.
pub fn cvec(entries: &[(f64, f64)]) -> CVec {
    CVec::from_iterator(entries.len(), entries.iter().map(|&(re, im)| C64::new(re, im)))
}

/// Interleaved real coordinates `(x_1, y_1, ..., x_n, y_n)`.
pub fn to_real(z: &CVec) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn from_real(x: &[f64]) -> CVec {
    CVec::from_iterator(x.len() / 2, x.chunks_exact(2).map(|p| C64::new(p[0], p[1])))
}

/// Hermitian product `<a, b> = sum a_j conj(b_j)`.
pub fn hermitian(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm(z: &CVec) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// One monomial `coeff * z^exps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: C64,
    pub exps: Vec<u32>,
}

impl Term {
    pub fn new(coeff: C64, exps: Vec<u32>) -> Self {
        Self { coeff, exps }
    }

    fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

/// Table of powers `z_j^e` for `e = 0..=max_exp[j]`.
struct Powers(Vec<Vec<C64>>);

impl Powers {
    fn new(z: impl Iterator<Item = C64>, max_exp: &[u32]) -> Self {
        Powers(
            z.zip(max_exp)
                .map(|(c, &m)| {
                    let mut row = Vec::with_capacity(m as usize + 1);
                    let mut acc = C64::new(1.0, 0.0);
                    row.push(acc);
                    for _ in 0..m {
                        acc *= c;
                        row.push(acc);
                    }
                    row
                })
                .collect(),
        )
    }

    /// Value of `d^k/dz_{d_1}..dz_{d_k}` applied to `z^exps`, for `k <= 2`.
    fn derivative(&self, exps: &[u32], d: &[usize]) -> C64 {
        let mut factor = 1.0;
        let mut lowered = [exps.len(); 2];
        let mut n_lowered = 0;
        for &j in d {
            let already = lowered[..n_lowered].iter().filter(|&&l| l == j).count() as u32;
            let e = exps[j];
            if e <= already {
                return C64::new(0.0, 0.0);
            }
            factor *= f64::from(e - already);
            lowered[n_lowered] = j;
            n_lowered += 1;
        }
        let mut acc = C64::new(factor, 0.0);
        for (k, &e) in exps.iter().enumerate() {
            let drop = lowered[..n_lowered].iter().filter(|&&l| l == k).count() as u32;
            let e = e - drop;
            if e > 0 {
                acc *= self.0[k][e as usize];
            }
        }
        acc
    }
}

fn max_exponents<'a>(n: usize, exps: impl Iterator<Item = &'a Vec<u32>>) -> Vec<u32> {
    let mut m = vec![0u32; n];
    for e in exps {
        for (slot, &v) in m.iter_mut().zip(e) {
            *slot = (*slot).max(v);
        }
    }
    m
}

/// Sparse holomorphic polynomial map `C^n -> C^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMap {
    n_in: usize,
    components: Vec<Vec<Term>>,
    #[serde(skip)]
    max_exp: Vec<u32>,
}

impl PolyMap {
    /// Builds a map from per-component term lists. Repeated exponent vectors
    /// are merged and zero coefficients dropped.
    pub fn new(n_in: usize, components: Vec<Vec<Term>>) -> Result<Self, CalcError> {
        if n_in == 0 || components.is_empty() {
            return Err(CalcError::InvalidPolynomial("empty map".into()));
        }
        let mut merged = Vec::with_capacity(components.len());
        for (i, comp) in components.into_iter().enumerate() {
            let mut by_exp: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
            for t in comp {
                if t.exps.len() != n_in {
                    return Err(CalcError::InvalidPolynomial(format!(
                        "component {i}: exponent vector of length {} for {n_in} variables",
                        t.exps.len()
                    )));
                }
                if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                    return Err(CalcError::InvalidPolynomial(format!(
                        "component {i}: non-finite coefficient"
                    )));
                }
                *by_exp.entry(t.exps).or_default() += t.coeff;
            }
            merged.push(
                by_exp
                    .into_iter()
                    .filter(|(_, c)| c.norm() > 0.0)
                    .map(|(exps, coeff)| Term { coeff, exps })
                    .collect::<Vec<_>>(),
            );
        }
        let degree = merged.iter().flatten().map(Term::degree).max().unwrap_or(0);
        if degree < 1 {
            return Err(CalcError::InvalidPolynomial("degree must be at least 1".into()));
        }
        let max_exp = max_exponents(n_in, merged.iter().flatten().map(|t| &t.exps));
        Ok(Self { n_in, components: merged, max_exp })
    }

    /// Rebuilds derived data after deserialization.
    pub fn revalidate(self) -> Result<Self, CalcError> {
        Self::new(self.n_in, self.components)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<Term>] {
        &self.components
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().flatten().map(Term::degree).max().unwrap_or(0)
    }

    /// True when every term of every component has the same total degree.
    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.components.iter().flatten().all(|t| t.degree() == d)
    }

    fn check(&self, z: &CVec) -> Result<Powers, CalcError> {
        if z.len() != self.n_in {
            return Err(CalcError::DimensionMismatch { expected: self.n_in, got: z.len() });
        }
        Ok(Powers::new(z.iter().copied(), &self.max_exp))
    }

    pub fn eval(&self, z: &CVec) -> Result<CVec, CalcError> {
        let p = self.check(z)?;
        Ok(CVec::from_iterator(
            self.n_out(),
            self.components
                .iter()
                .map(|comp| comp.iter().map(|t| t.coeff * p.derivative(&t.exps, &[])).sum()),
        ))
    }

    /// `n_out x n_in` matrix of `d(component i)/dz_j`.
    pub fn jacobian(&self, z: &CVec) -> Result<DMatrix<C64>, CalcError> {
        let p = self.check(z)?;
        let mut jac = DMatrix::zeros(self.n_out(), self.n_in);
        for (i, comp) in self.components.iter().enumerate() {
            for t in comp {
                for j in 0..self.n_in {
                    if t.exps[j] > 0 {
                        jac[(i, j)] += t.coeff * p.derivative(&t.exps, &[j]);
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Second derivatives: one symmetric `n_in x n_in` matrix per component.
    pub fn second(&self, z: &CVec) -> Result<Vec<DMatrix<C64>>, CalcError> {
        let p = self.check(z)?;
        let n = self.n_in;
        Ok(self
            .components
            .iter()
            .map(|comp| {
                let mut h = DMatrix::zeros(n, n);
                for t in comp {
                    for j in 0..n {
                        if t.exps[j] == 0 {
                            continue;
                        }
                        for k in j..n {
                            if t.exps[k] == 0 {
                                continue;
                            }
                            let v = t.coeff * p.derivative(&t.exps, &[j, k]);
                            h[(j, k)] += v;
                            if k != j {
                                h[(k, j)] += v;
                            }
                        }
                    }
                }
                h
            })
            .collect())
    }

    /// Fermat polynomial `sum lambda_j z_j^k`.
    pub fn fermat(lambda: &[C64], k: u32) -> Result<Self, CalcError> {
        let n = lambda.len();
        let terms = lambda
            .iter()
            .enumerate()
            .map(|(j, &l)| {
                let mut e = vec![0; n];
                e[j] = k;
                Term::new(l, e)
            })
            .collect();
        Self::new(n, vec![terms])
    }
}

/// Complex-valued sparse polynomial in `(z, conj z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedTerm {
    pub coeff: C64,
    pub z_exps: Vec<u32>,
    pub zbar_exps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedPoly {
    n: usize,
    terms: Vec<MixedTerm>,
    max_z: Vec<u32>,
    max_zbar: Vec<u32>,
}

/// First and second Wirtinger derivatives of a `(z, conj z)` polynomial.
#[derive(Debug, Clone)]
pub struct MixedDerivatives {
    pub value: C64,
    pub dz: CVec,
    pub dzbar: CVec,
    pub dzz: DMatrix<C64>,
    /// `(j, k)` entry is `d^2 / dz_j d(conj z_k)`.
    pub dzzbar: DMatrix<C64>,
    pub dzbarzbar: DMatrix<C64>,
}

impl MixedPoly {
    pub fn new(n: usize, terms: Vec<MixedTerm>) -> Result<Self, CalcError> {
        let mut by_exp: BTreeMap<(Vec<u32>, Vec<u32>), C64> = BTreeMap::new();
        for t in terms {
            if t.z_exps.len() != n || t.zbar_exps.len() != n {
                return Err(CalcError::InvalidPolynomial(format!(
                    "mixed term exponent vectors must have length {n}"
                )));
            }
            *by_exp.entry((t.z_exps, t.zbar_exps)).or_default() += t.coeff;
        }
        let terms: Vec<MixedTerm> = by_exp
            .into_iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|((z_exps, zbar_exps), coeff)| MixedTerm { coeff, z_exps, zbar_exps })
            .collect();
        let max_z = max_exponents(n, terms.iter().map(|t| &t.z_exps));
        let max_zbar = max_exponents(n, terms.iter().map(|t| &t.zbar_exps));
        Ok(Self { n, terms, max_z, max_zbar })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[MixedTerm] {
        &self.terms
    }

    fn powers(&self, z: &CVec) -> Result<(Powers, Powers), CalcError> {
        if z.len() != self.n {
            return Err(CalcError::DimensionMismatch { expected: self.n, got: z.len() });
        }
        Ok((
            Powers::new(z.iter().copied(), &self.max_z),
            Powers::new(z.iter().map(|c| c.conj()), &self.max_zbar),
        ))
    }

    pub fn eval(&self, z: &CVec) -> Result<C64, CalcError> {
        let (pz, pb) = self.powers(z)?;
        Ok(self
            .terms
            .iter()
            .map(|t| t.coeff * pz.derivative(&t.z_exps, &[]) * pb.derivative(&t.zbar_exps, &[]))
            .sum())
    }

    pub fn derivatives(&self, z: &CVec) -> Result<MixedDerivatives, CalcError> {
        let (pz, pb) = self.powers(z)?;
        let n = self.n;
        let mut out = MixedDerivatives {
            value: C64::new(0.0, 0.0),
            dz: CVec::zeros(n),
            dzbar: CVec::zeros(n),
            dzz: DMatrix::zeros(n, n),
            dzzbar: DMatrix::zeros(n, n),
            dzbarzbar: DMatrix::zeros(n, n),
        };
        for t in &self.terms {
            let (a, b) = (&t.z_exps, &t.zbar_exps);
            let za = pz.derivative(a, &[]);
            let zb = pb.derivative(b, &[]);
            out.value += t.coeff * za * zb;
            for j in 0..n {
                let da = if a[j] > 0 { pz.derivative(a, &[j]) } else { C64::new(0.0, 0.0) };
                let db = if b[j] > 0 { pb.derivative(b, &[j]) } else { C64::new(0.0, 0.0) };
                out.dz[j] += t.coeff * da * zb;
                out.dzbar[j] += t.coeff * za * db;
                for k in 0..n {
                    if a[j] > 0 && a[k] > 0 {
                        out.dzz[(j, k)] += t.coeff * pz.derivative(a, &[j, k]) * zb;
                    }
                    if b[j] > 0 && b[k] > 0 {
                        out.dzbarzbar[(j, k)] += t.coeff * za * pb.derivative(b, &[j, k]);
                    }
                    if a[j] > 0 && b[k] > 0 {
                        out.dzzbar[(j, k)] += t.coeff * da * pb.derivative(b, &[k]);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MorseKind {
    /// `g = sum |z_j|^2`.
    Round,
    /// `g = sum a_j x_j^2 + b_j y_j^2`.
    Weighted { a: Vec<f64>, b: Vec<f64> },
    /// Real polynomial in `(z, conj z)` given by its terms.
    General { terms: Vec<MixedTerm> },
}

/// Real-analytic Morse function with a nondegenerate minimum at the origin.
#[derive(Debug, Clone)]
pub struct MorseModel {
    kind: MorseKind,
    poly: MixedPoly,
}

/// Value and Wirtinger derivatives of a real function up to second order.
#[derive(Debug, Clone)]
pub struct WirtingerJet2 {
    pub value: f64,
    /// `dg/dz_j`.
    pub dz: CVec,
    /// `d^2 g / dz_j dz_k`.
    pub dzz: DMatrix<C64>,
    /// `d^2 g / dz_j d(conj z_k)`, Hermitian.
    pub dzzbar: DMatrix<C64>,
}

impl WirtingerJet2 {
    /// Euclidean gradient as a complex vector, `2 conj(dg/dz)`.
    pub fn gradient(&self) -> CVec {
        self.dz.map(|c| 2.0 * c.conj())
    }

    /// Gradient in interleaved real coordinates.
    pub fn real_gradient(&self) -> Vec<f64> {
        self.dz.iter().flat_map(|c| [2.0 * c.re, -2.0 * c.im]).collect()
    }

    /// Hessian in interleaved real coordinates.
    pub fn real_hessian(&self) -> DMatrix<f64> {
        let n = self.dz.len();
        let unit = [C64::new(1.0, 0.0), I];
        DMatrix::from_fn(2 * n, 2 * n, |a, b| {
            let (j, s) = (a / 2, a % 2);
            let (k, t) = (b / 2, b % 2);
            let (p, q) = (unit[s], unit[t]);
            2.0 * (p * self.dzz[(j, k)] * q).re + 2.0 * (p * self.dzzbar[(j, k)] * q.conj()).re
        })
    }
}

impl MorseModel {
    pub fn round(n: usize) -> Self {
        let terms = (0..n)
            .map(|j| {
                let mut e = vec![0; n];
                e[j] = 1;
                MixedTerm { coeff: C64::new(1.0, 0.0), z_exps: e.clone(), zbar_exps: e }
            })
            .collect();
        Self { kind: MorseKind::Round, poly: MixedPoly::new(n, terms).expect("round terms") }
    }

    pub fn weighted(a: Vec<f64>, b: Vec<f64>) -> Result<Self, CalcError> {
        if a.len() != b.len() || a.len() < 2 {
            return Err(CalcError::InvalidMorse("weights a and b must have equal length >= 2".into()));
        }
        if a.iter().chain(&b).any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(CalcError::InvalidMorse("weights must be positive".into()));
        }
        let n = a.len();
        let mut terms = Vec::with_capacity(3 * n);
        for j in 0..n {
            let mut sq = vec![0; n];
            sq[j] = 2;
            let mut one = vec![0; n];
            one[j] = 1;
            let off = C64::new((a[j] - b[j]) / 4.0, 0.0);
            terms.push(MixedTerm { coeff: off, z_exps: sq.clone(), zbar_exps: vec![0; n] });
            terms.push(MixedTerm { coeff: off, z_exps: vec![0; n], zbar_exps: sq });
            terms.push(MixedTerm {
                coeff: C64::new((a[j] + b[j]) / 2.0, 0.0),
                z_exps: one.clone(),
                zbar_exps: one,
            });
        }
        Ok(Self { kind: MorseKind::Weighted { a, b }, poly: MixedPoly::new(n, terms)? })
    }

    /// General real polynomial; checks conjugate symmetry, `g(0) = 0`, a
    /// critical point at 0 and a positive definite Hessian there.
    pub fn general(n: usize, terms: Vec<MixedTerm>) -> Result<Self, CalcError> {
        let poly = MixedPoly::new(n, terms)?;
        let scale = poly.terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max);
        let lookup: BTreeMap<(&[u32], &[u32]), C64> = poly
            .terms
            .iter()
            .map(|t| ((t.z_exps.as_slice(), t.zbar_exps.as_slice()), t.coeff))
            .collect();
        for t in &poly.terms {
            let mirror = lookup
                .get(&(t.zbar_exps.as_slice(), t.z_exps.as_slice()))
                .copied()
                .unwrap_or_default();
            if (mirror - t.coeff.conj()).norm() > 1e-12 * scale.max(1.0) {
                return Err(CalcError::InvalidMorse(format!(
                    "not real-valued: coefficient of z^{:?} zbar^{:?} lacks its conjugate partner",
                    t.z_exps, t.zbar_exps
                )));
            }
            let deg: u32 = t.z_exps.iter().chain(&t.zbar_exps).sum();
            if deg == 0 {
                return Err(CalcError::InvalidMorse("g(0) must vanish".into()));
            }
            if deg == 1 {
                return Err(CalcError::InvalidMorse("origin must be a critical point".into()));
            }
        }
        let model = Self { kind: MorseKind::General { terms: poly.terms.clone() }, poly };
        let hess = model.jet(&CVec::zeros(n))?.real_hessian();
        let eig = nalgebra::SymmetricEigen::new(hess).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
        if !(lo > 1e-10 * hi.max(1.0)) {
            return Err(CalcError::InvalidMorse(
                "Hessian at the origin is not positive definite (Morse index 0 required)".into(),
            ));
        }
        Ok(model)
    }

    pub fn from_kind(n: usize, kind: MorseKind) -> Result<Self, CalcError> {
        match kind {
            MorseKind::Round => Ok(Self::round(n)),
            MorseKind::Weighted { a, b } => {
                if a.len() != n {
                    return Err(CalcError::DimensionMismatch { expected: n, got: a.len() });
                }
                Self::weighted(a, b)
            }
            MorseKind::General { terms } => Self::general(n, terms),
        }
    }

    pub fn kind(&self) -> &MorseKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.poly.n
    }

    pub fn is_round(&self) -> bool {
        matches!(self.kind, MorseKind::Round)
    }

    pub fn value(&self, z: &CVec) -> Result<f64, CalcError> {
        Ok(self.poly.eval(z)?.re)
    }

    pub fn jet(&self, z: &CVec) -> Result<WirtingerJet2, CalcError> {
        let d = self.poly.derivatives(z)?;
        Ok(WirtingerJet2 { value: d.value.re, dz: d.dz, dzz: d.dzz, dzzbar: d.dzzbar })
    }

    /// Raw mixed derivatives including the imaginary part of the value,
    /// which is zero up to rounding for a valid model.
    pub fn raw_derivatives(&self, z: &CVec) -> Result<MixedDerivatives, CalcError> {
        self.poly.derivatives(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn z1cubed_minus_z2_4th() -> PolyMap {
        PolyMap::new(2, vec![vec![Term::new(c(1., 0.), vec![3, 0]), Term::new(c(-1., 0.), vec![0, 4])]])
            .unwrap()
    }

    #[test]
    fn eval_cancels_at_one_one() {
        let f = z1cubed_minus_z2_4th();
        let v = f.eval(&cvec(&[(1., 0.), (1., 0.)])).unwrap();
        assert_eq!(v[0], c(0., 0.));
    }

    #[test]
    fn eval_pham_field_on_axis() {
        // F = (q z2^{q-1}, p z1^{p-1}) with p = 3, q = 4.
        let f = PolyMap::new(
            2,
            vec![vec![Term::new(c(4., 0.), vec![0, 3])], vec![Term::new(c(3., 0.), vec![2, 0])]],
        )
        .unwrap();
        let v = f.eval(&cvec(&[(1., 0.), (0., 0.)])).unwrap();
        assert_eq!(v[0], c(0., 0.));
        assert_eq!(v[1], c(3., 0.));
    }

    #[test]
    fn fermat_at_cube_root_of_unity() {
        let h = PolyMap::fermat(&[c(1., 0.), c(1., 0.)], 3).unwrap();
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let v = h.eval(&CVec::from_vec(vec![c(1., 0.), w])).unwrap();
        assert!((v[0] - c(2., 0.)).norm() < 1e-14);
    }

    #[test]
    fn jacobian_power_rule() {
        let f = z1cubed_minus_z2_4th();
        let j = f.jacobian(&cvec(&[(1., 0.), (1., 0.)])).unwrap();
        assert_eq!(j[(0, 0)], c(3., 0.));
        assert_eq!(j[(0, 1)], c(-4., 0.));

        let h = PolyMap::fermat(&[c(1., 0.); 3], 3).unwrap();
        let j = h.jacobian(&cvec(&[(1., 0.); 3])).unwrap();
        for k in 0..3 {
            assert_eq!(j[(0, k)], c(3., 0.));
        }

        let q = PolyMap::fermat(&[c(1., 0.); 2], 2).unwrap();
        let j = q.jacobian(&cvec(&[(1., 0.), (0., 0.)])).unwrap();
        assert_eq!(j[(0, 0)], c(2., 0.));
        assert_eq!(j[(0, 1)], c(0., 0.));
    }

    #[test]
    fn second_derivatives() {
        let f = z1cubed_minus_z2_4th();
        let h = &f.second(&cvec(&[(1., 0.), (1., 0.)])).unwrap()[0];
        assert_eq!(h[(0, 0)], c(6., 0.));
        assert_eq!(h[(1, 1)], c(-12., 0.));
        assert_eq!(h[(0, 1)], c(0., 0.));

        let lin = PolyMap::new(
            2,
            vec![vec![Term::new(c(1., 0.), vec![1, 0])], vec![Term::new(c(2., 0.), vec![0, 1])]],
        )
        .unwrap();
        for m in lin.second(&cvec(&[(0.3, 0.1), (-0.2, 0.7)])).unwrap() {
            assert!(m.iter().all(|v| v.norm() == 0.0));
        }

        let prod = PolyMap::new(2, vec![vec![Term::new(c(1., 0.), vec![1, 1])]]).unwrap();
        let h = &prod.second(&cvec(&[(0.4, -1.0), (2.0, 0.5)])).unwrap()[0];
        assert_eq!(h[(0, 1)], c(1., 0.));
        assert_eq!(h[(1, 0)], c(1., 0.));
        assert_eq!(h[(0, 0)], c(0., 0.));
        assert_eq!(h[(1, 1)], c(0., 0.));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = z1cubed_minus_z2_4th();
        let err = f.eval(&cvec(&[(1., 0.)])).unwrap_err();
        assert_eq!(err, CalcError::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn duplicate_terms_merge_and_constant_maps_rejected() {
        let f = PolyMap::new(
            1,
            vec![vec![Term::new(c(1., 0.), vec![2]), Term::new(c(2., 0.), vec![2])]],
        )
        .unwrap();
        assert_eq!(f.components()[0].len(), 1);
        assert_eq!(f.components()[0][0].coeff, c(3., 0.));
        assert!(PolyMap::new(2, vec![vec![Term::new(c(1., 0.), vec![0, 0])]]).is_err());
    }

    #[test]
    fn round_jet() {
        let g = MorseModel::round(2);
        let jet = g.jet(&cvec(&[(1., 0.), (0., 1.)])).unwrap();
        assert!((jet.value - 2.0).abs() < 1e-15);
        assert_eq!(jet.dz[0], c(1., 0.));
        assert_eq!(jet.dz[1], c(0., -1.));
        assert_eq!(jet.dzzbar, DMatrix::identity(2, 2));
        assert!(jet.dzz.iter().all(|v| v.norm() == 0.0));

        let jet0 = g.jet(&CVec::zeros(2)).unwrap();
        assert_eq!(jet0.value, 0.0);
        assert!(jet0.dz.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn weighted_jet_matches_hand_expansion() {
        // a x^2 + b y^2 = (a-b)/4 (z^2 + zbar^2) + (a+b)/2 z zbar, so with
        // a = b = 2 in the first slot dg/dz_1 = 2 conj(z_1).
        let g = MorseModel::weighted(vec![2., 1.], vec![2., 1.]).unwrap();
        let jet = g.jet(&cvec(&[(1., 0.), (0., 0.)])).unwrap();
        assert!((jet.value - 2.0).abs() < 1e-15);
        assert!((jet.dz[0] - c(2., 0.)).norm() < 1e-15);
        assert!(jet.dz[1].norm() < 1e-15);

        let g = MorseModel::weighted(vec![3., 1.], vec![1., 2.]).unwrap();
        let z = cvec(&[(0.5, -0.25), (1.5, 2.0)]);
        let jet = g.jet(&z).unwrap();
        let expected = 3. * 0.25 + 1. * 0.0625 + 1. * 2.25 + 2. * 4.0;
        assert!((jet.value - expected).abs() < 1e-14);
        assert_eq!(jet.real_hessian(), DMatrix::from_diagonal(&DVector::from_vec(vec![6., 2., 2., 4.])));
    }

    #[test]
    fn general_rejects_non_real_and_indefinite() {
        let e = |a: [u32; 2], b: [u32; 2], re: f64, im: f64| MixedTerm {
            coeff: c(re, im),
            z_exps: a.to_vec(),
            zbar_exps: b.to_vec(),
        };
        // |z1|^2 + |z2|^2 + i z1^2 is not real.
        let bad = vec![e([1, 0], [1, 0], 1., 0.), e([0, 1], [0, 1], 1., 0.), e([2, 0], [0, 0], 0., 1.)];
        assert!(matches!(MorseModel::general(2, bad), Err(CalcError::InvalidMorse(_))));
        // |z1|^2 - |z2|^2 is real but has index 2.
        let saddle = vec![e([1, 0], [1, 0], 1., 0.), e([0, 1], [0, 1], -1., 0.)];
        assert!(MorseModel::general(2, saddle).is_err());
        // |z1|^2 + |z2|^2 + Re(z1^2 zbar2) is fine.
        let ok = vec![
            e([1, 0], [1, 0], 1., 0.),
            e([0, 1], [0, 1], 1., 0.),
            e([2, 0], [0, 1], 0.5, 0.),
            e([0, 1], [2, 0], 0.5, 0.),
        ];
        assert!(MorseModel::general(2, ok).is_ok());
    }
}
