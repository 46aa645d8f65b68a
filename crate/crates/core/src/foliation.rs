//! Foliation germs with an isolated singularity at the origin and their
//! tangent spaces at regular points.
//!
//! Three shapes are supported: a polynomial vector field (leaves of complex
//! dimension 1), a polynomial first integral `f` (leaves are the fibres of
//! `f`, codimension 1) and a diagonal linear action of `C^m` given by the
//! eigenvalue rows of a matrix `Lambda`.

use crate::calc::{norm, CalcError, CVec, PolyMap, C64};
use crate::linalg::orthonormalize;
use nalgebra::DMatrix;

/// Generators below this norm count as vanishing.
pub const GENERATOR_FLOOR: f64 = 1e-14;
/// `leaf_chart` refuses points where every partial of `f` is below this.
pub const NEAR_CRITICAL: f64 = 1e-12;
const RANK_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FoliationError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("invalid foliation model: {0}")]
    InvalidModel(String),
    #[error("singular point: every tangent generator vanishes at z")]
    SingularPoint,
    #[error("degenerate distribution: generators have numerical rank {rank} < {expected}")]
    DegenerateDistribution { rank: usize, expected: usize },
    #[error("near-critical point of the first integral: max |df/dz_j| = {max_partial:e}")]
    NearCritical { max_partial: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoliationModel {
    /// `F: C^n -> C^n`, one-dimensional leaves.
    VectorField(PolyMap),
    /// `f: C^n -> C`, leaves are the level sets of `f`.
    FirstIntegral(PolyMap),
    /// Rows `j` give the linear fields `F_j = (lambda^j_1 z_1, ..., lambda^j_n z_n)`.
    LinearAction(DMatrix<C64>),
}

/// Orthonormal frame of `T_z L_z`.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub z: CVec,
    pub basis: Vec<CVec>,
    pub raw_generators: Vec<CVec>,
    /// `basis[i] = sum_m coeffs[(i, m)] raw_generators[m]`.
    pub coeffs: DMatrix<C64>,
    pub generator_set: GeneratorSet,
}

/// Which holomorphic generators were used to build a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorSet {
    Field,
    Action,
    /// `v_{pivot,k}` for `k != pivot`.
    Pivot(usize),
    /// All `v_{j,k}` with `j < k`.
    Full,
}

/// Local holomorphic parametrization `w -> phi(w)` of the leaf, `phi(0) = z`,
/// through second order.
#[derive(Debug, Clone)]
pub struct ChartDescriptor {
    pub base: CVec,
    /// `d phi / d w_i` at 0.
    pub tangents: Vec<CVec>,
    /// `d^2 phi / d w_i d w_j` at 0, symmetric in `(i, j)`.
    pub second: Vec<Vec<CVec>>,
    pub kind: ChartKind,
}

#[derive(Debug, Clone)]
pub enum ChartKind {
    /// Graph over the non-pivot coordinates: `z_pivot = psi(z_free)`.
    Implicit {
        pivot: usize,
        free: Vec<usize>,
        /// `d z_pivot / d z_free[k]`.
        first: Vec<C64>,
        /// `d^2 z_pivot / d z_free[k] d z_free[l]`.
        second: DMatrix<C64>,
    },
    /// Complex-time flow chart, `gamma' = F(gamma)`.
    Flow { field: CVec, accel: CVec },
    /// Flow chart of the commuting linear fields.
    Action { fields: Vec<CVec> },
}

impl FoliationModel {
    pub fn vector_field(f: PolyMap) -> Result<Self, FoliationError> {
        if f.n_in() < 2 || f.n_out() != f.n_in() {
            return Err(FoliationError::InvalidModel(format!(
                "vector field must map C^n to C^n with n >= 2 (got {} -> {})",
                f.n_in(),
                f.n_out()
            )));
        }
        Ok(Self::VectorField(f))
    }

    pub fn first_integral(f: PolyMap) -> Result<Self, FoliationError> {
        if f.n_in() < 2 || f.n_out() != 1 {
            return Err(FoliationError::InvalidModel(format!(
                "first integral must map C^n to C with n >= 2 (got {} -> {})",
                f.n_in(),
                f.n_out()
            )));
        }
        Ok(Self::FirstIntegral(f))
    }

    pub fn linear_action(lambda: DMatrix<C64>) -> Result<Self, FoliationError> {
        let (m, n) = lambda.shape();
        if n < 2 || m < 1 || m >= n {
            return Err(FoliationError::InvalidModel(format!(
                "linear action needs 1 <= m < n, got m = {m}, n = {n}"
            )));
        }
        if lambda.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(FoliationError::InvalidModel("non-finite eigenvalue".into()));
        }
        Ok(Self::LinearAction(lambda))
    }

    /// Single diagonal linear vector field `(lambda_1 z_1, ..., lambda_n z_n)`.
    pub fn linear_field(lambda: &[C64]) -> Result<Self, FoliationError> {
        Self::linear_action(DMatrix::from_row_slice(1, lambda.len(), lambda))
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::VectorField(f) | Self::FirstIntegral(f) => f.n_in(),
            Self::LinearAction(l) => l.ncols(),
        }
    }

    /// Complex dimension `d` of the leaves.
    pub fn leaf_dim(&self) -> usize {
        match self {
            Self::VectorField(_) => 1,
            Self::FirstIntegral(f) => f.n_in() - 1,
            Self::LinearAction(l) => l.nrows(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::VectorField(_) => "vector_field",
            Self::FirstIntegral(_) => "first_integral",
            Self::LinearAction(_) => "linear_action",
        }
    }

    pub fn first_integral_map(&self) -> Option<&PolyMap> {
        match self {
            Self::FirstIntegral(f) => Some(f),
            _ => None,
        }
    }

    /// True for models whose defining data is homogeneous, so the polar set
    /// of the round metric is a cone.
    pub fn is_homogeneous(&self) -> bool {
        match self {
            Self::VectorField(f) | Self::FirstIntegral(f) => f.is_homogeneous(),
            Self::LinearAction(_) => true,
        }
    }

    fn check_dim(&self, z: &CVec) -> Result<(), FoliationError> {
        let n = self.ambient_dim();
        if z.len() != n {
            return Err(CalcError::DimensionMismatch { expected: n, got: z.len() }.into());
        }
        Ok(())
    }

    fn df(&self, f: &PolyMap, z: &CVec) -> Result<Vec<C64>, FoliationError> {
        Ok(f.jacobian(z)?.row(0).iter().copied().collect())
    }

    /// Pivot index `argmax_j |df/dz_j|`, lowest index on ties.
    pub fn pivot(&self, z: &CVec) -> Result<Option<usize>, FoliationError> {
        match self {
            Self::FirstIntegral(f) => {
                let df = self.df(f, z)?;
                let mut best = 0;
                for (j, c) in df.iter().enumerate() {
                    if c.norm() > df[best].norm() {
                        best = j;
                    }
                }
                Ok(Some(best))
            }
            _ => Ok(None),
        }
    }

    /// Holomorphic generators of the tangent distribution at `z`.
    pub fn generators(&self, z: &CVec, set: GeneratorSet) -> Result<Vec<CVec>, FoliationError> {
        self.check_dim(z)?;
        let n = self.ambient_dim();
        match (self, set) {
            (Self::VectorField(f), GeneratorSet::Field) => Ok(vec![f.eval(z)?]),
            (Self::LinearAction(l), GeneratorSet::Action) => Ok((0..l.nrows())
                .map(|j| CVec::from_iterator(n, (0..n).map(|a| l[(j, a)] * z[a])))
                .collect()),
            (Self::FirstIntegral(f), GeneratorSet::Pivot(p)) => {
                let df = self.df(f, z)?;
                Ok((0..n).filter(|&k| k != p).map(|k| v_jk(&df, p, k)).collect())
            }
            (Self::FirstIntegral(f), GeneratorSet::Full) => {
                let df = self.df(f, z)?;
                Ok((0..n).flat_map(|j| ((j + 1)..n).map(move |k| (j, k))).map(|(j, k)| v_jk(&df, j, k)).collect())
            }
            _ => Err(FoliationError::InvalidModel(format!("generator set {set:?} does not apply to {}", self.kind_name()))),
        }
    }

    /// `d(generator)/dz` for every generator of `set`, as `n x n` matrices.
    pub fn generator_jacobians(&self, z: &CVec, set: GeneratorSet) -> Result<Vec<DMatrix<C64>>, FoliationError> {
        self.check_dim(z)?;
        let n = self.ambient_dim();
        match (self, set) {
            (Self::VectorField(f), GeneratorSet::Field) => Ok(vec![f.jacobian(z)?]),
            (Self::LinearAction(l), GeneratorSet::Action) => Ok((0..l.nrows())
                .map(|j| DMatrix::from_fn(n, n, |a, b| if a == b { l[(j, a)] } else { C64::new(0.0, 0.0) }))
                .collect()),
            (Self::FirstIntegral(f), GeneratorSet::Pivot(_) | GeneratorSet::Full) => {
                let hess = &f.second(z)?[0];
                let pairs: Vec<(usize, usize)> = match set {
                    GeneratorSet::Pivot(p) => (0..n).filter(|&k| k != p).map(|k| (p, k)).collect(),
                    _ => (0..n).flat_map(|j| ((j + 1)..n).map(move |k| (j, k))).collect(),
                };
                Ok(pairs
                    .into_iter()
                    .map(|(j, k)| {
                        let mut m = DMatrix::zeros(n, n);
                        for l in 0..n {
                            m[(j, l)] = hess[(k, l)];
                            m[(k, l)] = -hess[(j, l)];
                        }
                        m
                    })
                    .collect())
            }
            _ => Err(FoliationError::InvalidModel(format!("generator set {set:?} does not apply to {}", self.kind_name()))),
        }
    }

    fn default_set(&self, z: &CVec) -> Result<GeneratorSet, FoliationError> {
        Ok(match self {
            Self::VectorField(_) => GeneratorSet::Field,
            Self::LinearAction(_) => GeneratorSet::Action,
            Self::FirstIntegral(_) => GeneratorSet::Pivot(self.pivot(z)?.unwrap_or(0)),
        })
    }

    /// Orthonormal frame of the leaf tangent space at `z`.
    pub fn tangent_basis(&self, z: &CVec) -> Result<TangentFrame, FoliationError> {
        let set = self.default_set(z)?;
        self.tangent_basis_with(z, set)
    }

    /// Frame built from an explicit generator family. For first integrals a
    /// pivot family of insufficient rank falls back to the full family.
    pub fn tangent_basis_with(&self, z: &CVec, set: GeneratorSet) -> Result<TangentFrame, FoliationError> {
        self.check_dim(z)?;
        if z.iter().all(|c| c.norm() == 0.0) {
            return Err(FoliationError::SingularPoint);
        }
        let d = self.leaf_dim();
        let gens = self.generators(z, set)?;
        if gens.iter().all(|g| norm(g) < GENERATOR_FLOOR) {
            return Err(FoliationError::SingularPoint);
        }
        let ortho = orthonormalize(&gens, d, RANK_REL_TOL);
        if ortho.basis.len() < d {
            if let GeneratorSet::Pivot(_) = set {
                return self.tangent_basis_with(z, GeneratorSet::Full);
            }
            return Err(FoliationError::DegenerateDistribution { rank: ortho.basis.len(), expected: d });
        }
        let coeffs = DMatrix::from_fn(d, gens.len(), |i, m| ortho.coeffs[i][m]);
        Ok(TangentFrame { z: z.clone(), basis: ortho.basis, raw_generators: gens, coeffs, generator_set: set })
    }

    /// Second-order leaf chart at a regular point.
    pub fn leaf_chart(&self, z: &CVec) -> Result<ChartDescriptor, FoliationError> {
        self.check_dim(z)?;
        let n = self.ambient_dim();
        match self {
            Self::FirstIntegral(f) => {
                let df = self.df(f, z)?;
                let p = self.pivot(z)?.unwrap_or(0);
                let fp = df[p];
                if fp.norm() < NEAR_CRITICAL {
                    return Err(FoliationError::NearCritical { max_partial: fp.norm() });
                }
                let hess = &f.second(z)?[0];
                let free: Vec<usize> = (0..n).filter(|&k| k != p).collect();
                let first: Vec<C64> = free.iter().map(|&k| -df[k] / fp).collect();
                let m = free.len();
                let second = DMatrix::from_fn(m, m, |a, b| {
                    let (k, l) = (free[a], free[b]);
                    let s = hess[(k, l)]
                        + hess[(k, p)] * first[b]
                        + hess[(l, p)] * first[a]
                        + hess[(p, p)] * first[a] * first[b];
                    -s / fp
                });
                let tangents = (0..m)
                    .map(|a| {
                        let mut t = CVec::zeros(n);
                        t[free[a]] = C64::new(1.0, 0.0);
                        t[p] = first[a];
                        t
                    })
                    .collect();
                let second_vecs = (0..m)
                    .map(|a| {
                        (0..m)
                            .map(|b| {
                                let mut s = CVec::zeros(n);
                                s[p] = second[(a, b)];
                                s
                            })
                            .collect()
                    })
                    .collect();
                Ok(ChartDescriptor {
                    base: z.clone(),
                    tangents,
                    second: second_vecs,
                    kind: ChartKind::Implicit { pivot: p, free, first, second },
                })
            }
            Self::VectorField(f) => {
                let field = f.eval(z)?;
                if norm(&field) < GENERATOR_FLOOR {
                    return Err(FoliationError::SingularPoint);
                }
                let accel = f.jacobian(z)? * &field;
                Ok(ChartDescriptor {
                    base: z.clone(),
                    tangents: vec![field.clone()],
                    second: vec![vec![accel.clone()]],
                    kind: ChartKind::Flow { field, accel },
                })
            }
            Self::LinearAction(l) => {
                // Rank check through the frame.
                self.tangent_basis(z)?;
                let m = l.nrows();
                let fields: Vec<CVec> = self.generators(z, GeneratorSet::Action)?;
                let second = (0..m)
                    .map(|j| {
                        (0..m)
                            .map(|k| CVec::from_iterator(n, (0..n).map(|a| l[(j, a)] * l[(k, a)] * z[a])))
                            .collect()
                    })
                    .collect();
                Ok(ChartDescriptor { base: z.clone(), tangents: fields.clone(), second, kind: ChartKind::Action { fields } })
            }
        }
    }

    /// Checks the isolated-singularity invariant on a handful of
    /// deterministic sample points of the unit sphere.
    pub fn check_generic_regularity(&self, samples: &[CVec]) -> Result<(), FoliationError> {
        for z in samples {
            self.tangent_basis(z)?;
            if let Self::FirstIntegral(f) = self {
                let df = self.df(f, z)?;
                if df.iter().all(|c| c.norm() < NEAR_CRITICAL) {
                    return Err(FoliationError::InvalidModel(
                        "first integral has a critical point away from the origin".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `v_{j,k}`: `df/dz_k` in slot `j`, `-df/dz_j` in slot `k`.
fn v_jk(df: &[C64], j: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(df.len());
    v[j] = df[k];
    v[k] = -df[j];
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::{cvec, hermitian, Term};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn quadric() -> FoliationModel {
        FoliationModel::first_integral(PolyMap::fermat(&[c(1., 0.), c(1., 0.)], 2).unwrap()).unwrap()
    }

    #[test]
    fn vector_field_frame_is_normalized_field() {
        let f = PolyMap::new(2, vec![vec![Term::new(c(1., 0.), vec![1, 0])], vec![Term::new(c(2., 0.), vec![0, 1])]])
            .unwrap();
        let model = FoliationModel::vector_field(f).unwrap();
        let frame = model.tangent_basis(&cvec(&[(1., 0.), (0., 0.)])).unwrap();
        assert_eq!(frame.basis.len(), 1);
        assert!((frame.basis[0][0] - c(1., 0.)).norm() < 1e-15);
        assert!(frame.basis[0][1].norm() < 1e-15);
    }

    #[test]
    fn first_integral_frame_uses_pivot_generator() {
        let model = quadric();
        let z = cvec(&[(1., 0.), (0., 0.)]);
        assert_eq!(model.pivot(&z).unwrap(), Some(0));
        let frame = model.tangent_basis(&z).unwrap();
        assert_eq!(frame.raw_generators[0], cvec(&[(0., 0.), (-2., 0.)]));
        assert!(frame.basis[0][0].norm() < 1e-15);
        assert!((frame.basis[0][1] - c(-1., 0.)).norm() < 1e-15);
    }

    #[test]
    fn linear_action_frame() {
        let model = FoliationModel::linear_field(&[c(1., 0.), c(-1., 0.)]).unwrap();
        let frame = model.tangent_basis(&cvec(&[(1., 0.), (1., 0.)])).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((frame.basis[0][0] - c(s, 0.)).norm() < 1e-15);
        assert!((frame.basis[0][1] - c(-s, 0.)).norm() < 1e-15);
    }

    #[test]
    fn singular_points_are_rejected() {
        let model = quadric();
        assert_eq!(model.tangent_basis(&CVec::zeros(2)).unwrap_err(), FoliationError::SingularPoint);
        let field = FoliationModel::linear_field(&[c(1., 0.), c(2., 0.)]).unwrap();
        assert!(field.tangent_basis(&cvec(&[(1e-300, 0.), (0., 0.)])).is_err());
    }

    #[test]
    fn dependent_action_generators_report_rank() {
        let l = DMatrix::from_row_slice(2, 3, &[c(1., 0.), c(2., 0.), c(3., 0.), c(1., 1.), c(0., 1.), c(-1., 0.)]);
        let model = FoliationModel::linear_action(l).unwrap();
        // On a coordinate axis both fields are parallel.
        let err = model.tangent_basis(&cvec(&[(1., 0.), (0., 0.), (0., 0.)])).unwrap_err();
        assert_eq!(err, FoliationError::DegenerateDistribution { rank: 1, expected: 2 });
    }

    #[test]
    fn implicit_chart_of_quadric() {
        // z1^2 + z2^2 = c near (1, 0): z1 = sqrt(1 - z2^2), so dz1/dz2 = 0 and
        // d^2 z1/dz2^2 = -1.
        let chart = quadric().leaf_chart(&cvec(&[(1., 0.), (0., 0.)])).unwrap();
        match chart.kind {
            ChartKind::Implicit { pivot, ref first, ref second, .. } => {
                assert_eq!(pivot, 0);
                assert!(first[0].norm() < 1e-15);
                assert!((second[(0, 0)] - c(-1., 0.)).norm() < 1e-15);
            }
            _ => panic!("expected implicit chart"),
        }
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let f = PolyMap::new(2, vec![vec![Term::new(c(1., 0.), vec![1, 1])]]).unwrap();
        let model = FoliationModel::first_integral(f).unwrap();
        let chart = model.leaf_chart(&cvec(&[(1., 0.), (1., 0.)])).unwrap();
        match chart.kind {
            ChartKind::Implicit { pivot, ref first, .. } => {
                assert_eq!(pivot, 0);
                assert!((first[0] - c(-1., 0.)).norm() < 1e-15);
            }
            _ => panic!("expected implicit chart"),
        }
    }

    #[test]
    fn flow_chart_data() {
        let f = PolyMap::new(2, vec![vec![Term::new(c(1., 0.), vec![1, 0])], vec![Term::new(c(2., 0.), vec![0, 1])]])
            .unwrap();
        let model = FoliationModel::vector_field(f).unwrap();
        let chart = model.leaf_chart(&cvec(&[(0., 0.), (1., 0.)])).unwrap();
        match chart.kind {
            ChartKind::Flow { field, accel } => {
                assert_eq!(field, cvec(&[(0., 0.), (2., 0.)]));
                assert_eq!(accel, cvec(&[(0., 0.), (4., 0.)]));
            }
            _ => panic!("expected flow chart"),
        }
    }

    #[test]
    fn near_critical_chart_is_an_error() {
        let model = quadric();
        let err = model.leaf_chart(&cvec(&[(1e-14, 0.), (0., 0.)])).unwrap_err();
        assert!(matches!(err, FoliationError::NearCritical { .. }));
    }

    #[test]
    fn full_generator_family_spans_same_space() {
        let f = PolyMap::fermat(&[c(1., 0.), c(2., -1.), c(0.5, 0.5)], 3).unwrap();
        let model = FoliationModel::first_integral(f).unwrap();
        let z = cvec(&[(0.3, 0.2), (-0.5, 0.1), (0.7, -0.4)]);
        let a = model.tangent_basis(&z).unwrap();
        let b = model.tangent_basis_with(&z, GeneratorSet::Full).unwrap();
        // Every vector of one frame lies in the span of the other.
        for v in &a.basis {
            let proj = b.basis.iter().fold(CVec::zeros(3), |acc, w| acc + w * hermitian(v, w));
            assert!(norm(&(v - proj)) < 1e-12);
        }
    }
}
