//! Shared oracles for the integration suites.

#![allow(dead_code)]

use foliage::calc::{norm, CVec, MixedTerm, MorseModel, PolyMap, C64};
use foliage::foliation::FoliationModel;
use foliage::models;
use foliage::morse::restricted_hessian;
use foliage::polar::{find_contacts_on_sphere, SolverOptions};
use nalgebra::DMatrix;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub struct Family {
    pub name: &'static str,
    pub model: FoliationModel,
    pub morse: MorseModel,
    pub eps: f64,
}

/// `sum |z_j|^2 + 0.3 |z_1|^4`.
pub fn quartic_perturbed_round(n: usize) -> MorseModel {
    let unit = |j: usize| (0..n).map(|k| u32::from(k == j)).collect::<Vec<u32>>();
    let mut terms: Vec<MixedTerm> =
        (0..n).map(|j| MixedTerm { coeff: c(1., 0.), z_exps: unit(j), zbar_exps: unit(j) }).collect();
    let mut sq = vec![0; n];
    sq[0] = 2;
    terms.push(MixedTerm { coeff: c(0.3, 0.), z_exps: sq.clone(), zbar_exps: sq });
    MorseModel::general(n, terms).unwrap()
}

pub fn families() -> Vec<Family> {
    let fermat = models::fermat(&[c(1., 0.), c(1., 0.)], 3).unwrap();
    let fermat3 = models::fermat(&[c(1., 0.), c(0.7, 0.4), c(1.3, -0.2)], 4).unwrap();
    let quadric = models::weighted_quadric(vec![2.0, 1.0], vec![2.0, 1.0]).unwrap();
    let pham = models::pham(3, 4).unwrap();
    let twisted = models::twisted_diagonal([c(1., 0.), c(2., 0.)], [2, 3]).unwrap();
    let siegel = models::siegel_cube_roots().unwrap();
    let simplex = models::simplex_action(2).unwrap();
    vec![
        Family { name: "fermat n=2 k=3", model: fermat.model.clone(), morse: fermat.morse, eps: 1.0 },
        Family { name: "fermat n=3 k=4", model: fermat3.model, morse: fermat3.morse, eps: 1.0 },
        Family { name: "fermat n=2 k=3, quartic g", model: fermat.model, morse: quartic_perturbed_round(2), eps: 0.8 },
        Family { name: "weighted quadric", model: quadric.model, morse: quadric.morse, eps: 1.0 },
        Family { name: "pham 3,4", model: pham.model, morse: pham.morse, eps: 0.5 },
        Family { name: "twisted diagonal", model: twisted.model, morse: twisted.morse, eps: 0.7 },
        Family { name: "siegel linear", model: siegel.model, morse: siegel.morse, eps: 1.0 },
        Family { name: "simplex action", model: simplex.model, morse: simplex.morse, eps: 1.0 },
    ]
}

/// Up to `count` contacts of the family, spread over the located sample.
pub fn family_contacts(f: &Family, count: usize, opts: &SolverOptions) -> Vec<CVec> {
    let search = find_contacts_on_sphere(&f.model, &f.morse, f.eps, count + 50, opts).unwrap();
    let pts: Vec<CVec> = search.points.into_iter().map(|p| p.z).collect();
    let stride = (pts.len() / count).max(1);
    pts.into_iter().step_by(stride).take(count).collect()
}

enum OracleChart<'a> {
    /// Graph over the coordinates other than `pivot`, corrected by Newton.
    Implicit { f: &'a PolyMap, pivot: usize, free: Vec<usize>, value: C64 },
    /// Complex-time flow of the field, by RK4 along the ray.
    Flow { f: &'a PolyMap },
    /// `z_j exp(sum_k w_k lambda_kj)`.
    Action { lambda: &'a DMatrix<C64> },
}

impl OracleChart<'_> {
    fn eval(&self, z: &CVec, w: &[C64]) -> CVec {
        match self {
            Self::Implicit { f, pivot, free, value } => {
                let mut p = z.clone();
                for (k, &j) in free.iter().enumerate() {
                    p[j] += w[k];
                }
                for _ in 0..60 {
                    let r = f.eval(&p).unwrap()[0] - value;
                    let dp = f.jacobian(&p).unwrap()[(0, *pivot)];
                    let step = r / dp;
                    p[*pivot] -= step;
                    if step.norm() < 1e-17 * norm(z) {
                        break;
                    }
                }
                p
            }
            Self::Flow { f } => {
                let steps = 64;
                let h = w[0] / steps as f64;
                let rhs = |y: &CVec| f.eval(y).unwrap() * h;
                let mut y = z.clone();
                for _ in 0..steps {
                    let k1 = rhs(&y);
                    let k2 = rhs(&(&y + &k1 * c(0.5, 0.)));
                    let k3 = rhs(&(&y + &k2 * c(0.5, 0.)));
                    let k4 = rhs(&(&y + &k3));
                    y += (k1 + k2 * c(2., 0.) + k3 * c(2., 0.) + k4) / c(6., 0.);
                }
                y
            }
            Self::Action { lambda } => CVec::from_iterator(
                z.len(),
                (0..z.len()).map(|j| z[j] * (0..w.len()).map(|k| w[k] * lambda[(k, j)]).sum::<C64>().exp()),
            ),
        }
    }

    /// Linear part of the chart at `z`, columns indexed by chart coordinate.
    fn linear_part(&self, z: &CVec) -> Vec<CVec> {
        match self {
            Self::Implicit { f, pivot, free, .. } => {
                let df = f.jacobian(z).unwrap();
                free.iter()
                    .map(|&j| {
                        let mut v = CVec::zeros(z.len());
                        v[j] = c(1., 0.);
                        v[*pivot] = -df[(0, j)] / df[(0, *pivot)];
                        v
                    })
                    .collect()
            }
            Self::Flow { f } => vec![f.eval(z).unwrap()],
            Self::Action { lambda } => (0..lambda.nrows())
                .map(|k| CVec::from_iterator(z.len(), (0..z.len()).map(|j| lambda[(k, j)] * z[j])))
                .collect(),
        }
    }
}

fn oracle_chart<'a>(model: &'a FoliationModel, z: &CVec) -> OracleChart<'a> {
    match model {
        FoliationModel::FirstIntegral(f) => {
            let df = f.jacobian(z).unwrap();
            let pivot = (0..z.len()).max_by(|&a, &b| df[(0, a)].norm().total_cmp(&df[(0, b)].norm())).unwrap();
            let free = (0..z.len()).filter(|&j| j != pivot).collect();
            OracleChart::Implicit { f, pivot, free, value: f.eval(z).unwrap()[0] }
        }
        FoliationModel::VectorField(f) => OracleChart::Flow { f },
        FoliationModel::LinearAction(l) => OracleChart::Action { lambda: l },
    }
}

/// Real `2d x 2d` matrix of `w -> M w` in interleaved coordinates.
fn real_form(m: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, k) = m.shape();
    DMatrix::from_fn(2 * r, 2 * k, |i, j| {
        let a = m[(i / 2, j / 2)];
        match (i % 2, j % 2) {
            (0, 0) | (1, 1) => a.re,
            (0, 1) => -a.im,
            _ => a.im,
        }
    })
}

fn fd_hessian(chart: &OracleChart, g: &MorseModel, z: &CVec, d: usize, h: f64) -> DMatrix<f64> {
    let value = |x: &[f64]| {
        let w: Vec<C64> = (0..d).map(|k| c(x[2 * k], x[2 * k + 1])).collect();
        g.value(&chart.eval(z, &w)).unwrap()
    };
    let dim = 2 * d;
    let zero = vec![0.0; dim];
    let f0 = value(&zero);
    let shifted = |a: usize, sa: f64, b: Option<(usize, f64)>| {
        let mut x = zero.clone();
        x[a] += sa;
        if let Some((b, sb)) = b {
            x[b] += sb;
        }
        value(&x)
    };
    DMatrix::from_fn(dim, dim, |a, b| {
        if a == b {
            (shifted(a, h, None) - 2.0 * f0 + shifted(a, -h, None)) / (h * h)
        } else {
            (shifted(a, h, Some((b, h))) - shifted(a, h, Some((b, -h))) - shifted(a, -h, Some((b, h)))
                + shifted(a, -h, Some((b, -h))))
                / (4.0 * h * h)
        }
    })
}

/// Relative Frobenius distance between the library's restricted Hessian at a
/// contact and a finite-difference Hessian of `g` along an independently
/// built leaf chart.
pub fn hessian_oracle_error(model: &FoliationModel, g: &MorseModel, z: &CVec) -> f64 {
    let lib = restricted_hessian(model, g, z).unwrap();
    oracle_distance(model, g, z, &lib.chart.tangents, &lib.matrix)
}

/// Hessian of `g` on the tangent plane alone, without the curvature of the
/// leaf; differs from the restricted Hessian wherever the leaf bends.
pub fn flat_hessian(model: &FoliationModel, g: &MorseModel, z: &CVec) -> (Vec<CVec>, DMatrix<f64>) {
    let t = restricted_hessian(model, g, z).unwrap().chart.tangents;
    let tm = DMatrix::from_fn(z.len(), t.len(), |i, k| t[k][i]);
    let r = real_form(&tm);
    let h = r.transpose() * g.jet(z).unwrap().real_hessian() * r;
    (t, h)
}

/// Relative distance of `candidate`, a Hessian in the chart with tangents
/// `t`, from the finite-difference oracle.
pub fn oracle_distance(model: &FoliationModel, g: &MorseModel, z: &CVec, t: &[CVec], candidate: &DMatrix<f64>) -> f64 {
    let chart = oracle_chart(model, z);
    let basis = chart.linear_part(z);
    let d = basis.len();
    let gm = DMatrix::from_fn(z.len(), d, |i, k| basis[k][i]);
    let tm = DMatrix::from_fn(z.len(), t.len(), |i, k| t[k][i]);
    // Coordinates of the library tangents in the oracle chart's linear part.
    let gh = gm.adjoint();
    let m = (&gh * &gm).try_inverse().unwrap() * gh * tm;
    let scale = norm(z) / (0..d).map(|k| norm(&basis[k])).fold(0.0, f64::max);
    let h = 2e-3 * scale;
    let coarse = fd_hessian(&chart, g, z, d, h);
    let fine = fd_hessian(&chart, g, z, d, 0.5 * h);
    let oracle_g = (fine * 4.0 - coarse) / 3.0;
    let r = real_form(&m);
    let oracle = r.transpose() * oracle_g * r;
    (&oracle - candidate).norm() / candidate.norm().max(f64::MIN_POSITIVE)
}
