//! Hessian of `g` restricted to leaves, Morse-index classification and
//! signed counts of contacts.

use crate::calc::{CVec, MorseModel, PolyMap, C64};
use crate::foliation::{ChartDescriptor, FoliationError, FoliationModel};
use crate::linalg::sym_eigenvalues;
use crate::polar::{require_on_set, ContactPoint, PolarError};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MorseError {
    #[error(transparent)]
    Foliation(#[from] FoliationError),
    #[error("point is not on the contact set: residual {residual:e}")]
    NotOnContactSet { residual: f64 },
    #[error("{count} degenerate contact(s) among {total}; signed count undefined")]
    DegenerateContacts { count: usize, total: usize },
}

impl From<PolarError> for MorseError {
    fn from(e: PolarError) -> Self {
        match e {
            PolarError::Foliation(f) => Self::Foliation(f),
            PolarError::NotOnContactSet { residual } => Self::NotOnContactSet { residual },
            other => Self::Foliation(FoliationError::InvalidModel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestrictedHessian {
    /// Real `2d x 2d` Hessian in chart coordinates `(u_1, v_1, ..., u_d, v_d)`.
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub chart: ChartDescriptor,
}

/// Hessian of `g` composed with the second-order leaf chart at `z`.
pub fn restricted_hessian(model: &FoliationModel, g: &MorseModel, z: &CVec) -> Result<RestrictedHessian, MorseError> {
    let chart = model.leaf_chart(z)?;
    let jet = g.jet(z).map_err(FoliationError::from)?;
    let t = &chart.tangents;
    let d = t.len();
    let a = DMatrix::from_fn(d, d, |j, k| {
        let quad = (t[j].transpose() * &jet.dzz * &t[k])[(0, 0)];
        let lin: C64 = jet.dz.iter().zip(chart.second[j][k].iter()).map(|(p, q)| p * q).sum();
        quad + lin
    });
    let b = DMatrix::from_fn(d, d, |j, k| (t[j].transpose() * &jet.dzzbar * t[k].conjugate())[(0, 0)]);
    let mut h = DMatrix::zeros(2 * d, 2 * d);
    for j in 0..d {
        for k in 0..d {
            let (ajk, bjk) = (a[(j, k)], b[(j, k)]);
            h[(2 * j, 2 * k)] = 2.0 * ajk.re + 2.0 * bjk.re;
            h[(2 * j, 2 * k + 1)] = -2.0 * ajk.im + 2.0 * bjk.im;
            h[(2 * j + 1, 2 * k)] = -2.0 * ajk.im - 2.0 * bjk.im;
            h[(2 * j + 1, 2 * k + 1)] = -2.0 * ajk.re + 2.0 * bjk.re;
        }
    }
    let eigenvalues = sym_eigenvalues(&h);
    Ok(RestrictedHessian { matrix: h, eigenvalues, chart })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `None` when degenerate.
    pub index: Option<usize>,
    pub degenerate: bool,
    pub eigenvalues: Vec<f64>,
}

/// Index and degeneracy from eigenvalues, relative to the spectral norm.
pub fn classify_eigenvalues(eigenvalues: &[f64], tol: f64) -> Classification {
    let scale = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let cut = tol * scale;
    let degenerate = scale == 0.0 || eigenvalues.iter().any(|e| e.abs() <= cut);
    let index = eigenvalues.iter().filter(|&&e| e < -cut).count();
    Classification { index: (!degenerate).then_some(index), degenerate, eigenvalues: eigenvalues.to_vec() }
}

/// Smallest `|eigenvalue| / max |eigenvalue|`.
pub fn relative_min_eigenvalue(eigenvalues: &[f64]) -> f64 {
    let scale = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.abs())) / scale
}

pub fn classify_contact(
    model: &FoliationModel,
    g: &MorseModel,
    z: &CVec,
    tol: f64,
) -> Result<Classification, MorseError> {
    require_on_set(model, g, z)?;
    let h = restricted_hessian(model, g, z)?;
    Ok(classify_eigenvalues(&h.eigenvalues, tol))
}

/// Sum of `(-1)^index` over the contacts of one leaf.
pub fn euler_count(contacts: &[ContactPoint]) -> Result<i64, MorseError> {
    let count = contacts.iter().filter(|p| p.degenerate || p.morse_index.is_none()).count();
    if count > 0 {
        return Err(MorseError::DegenerateContacts { count, total: contacts.len() });
    }
    Ok(contacts.iter().map(|p| if p.morse_index.unwrap_or(0) % 2 == 0 { 1 } else { -1 }).sum())
}

/// Groups contacts by the value of a first integral; values closer than
/// `tol` (relative to the largest value) share a leaf.
pub fn group_by_level(level: &PolyMap, contacts: &[ContactPoint], tol: f64) -> Result<Vec<(C64, Vec<usize>)>, MorseError> {
    let values: Vec<C64> = contacts
        .iter()
        .map(|p| level.eval(&p.z).map(|v| v[0]))
        .collect::<Result<_, _>>()
        .map_err(FoliationError::from)?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE);
    let mut groups: Vec<(C64, Vec<usize>)> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match groups.iter_mut().find(|(c, _)| (c - v).norm() <= tol * scale) {
            Some((_, members)) => members.push(i),
            None => groups.push((*v, vec![i])),
        }
    }
    Ok(groups)
}
