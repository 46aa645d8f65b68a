//! Transversality between leaves and the contact set.

use crate::calc::{norm, CVec, MorseModel};
use crate::foliation::FoliationModel;
use crate::linalg::{numerical_rank, real_span, row_space, singular_values};
use crate::morse::restricted_hessian;
use crate::polar::{
    contact_jacobian, newton_contact, require_on_set, smoothness_from_jacobian, Constraint, NewtonStatus, PolarError,
    SolverOptions,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalityVerdict {
    /// `None` when the contact set is not smooth and reduced at the point.
    pub transversal: Option<bool>,
    /// Numerical rank of the Jacobian restricted to the leaf tangent space.
    pub tangent_rank: usize,
    /// `sigma_min / sigma_max` of that restricted block.
    pub block_ratio: f64,
    /// Largest principal-angle cosine between the leaf tangent space and the
    /// kernel of the Jacobian.
    pub kernel_overlap: f64,
    /// The block-rank and principal-angle tests disagree.
    pub borderline: bool,
}

pub fn is_transversal(
    model: &FoliationModel,
    g: &MorseModel,
    z: &CVec,
    rank_tol: f64,
) -> Result<TransversalityVerdict, PolarError> {
    require_on_set(model, g, z)?;
    let jac = contact_jacobian(model, g, z)?;
    let smooth = smoothness_from_jacobian(&jac, rank_tol);
    let frame = model.tangent_basis(z)?;
    let span = real_span(&frame.basis);
    let dim = span.ncols();

    let block_sv = singular_values(&(&jac * &span));
    let tangent_rank = numerical_rank(&block_sv, rank_tol);
    let top = block_sv.first().copied().unwrap_or(0.0);
    let block_ratio = if top > 0.0 { block_sv.last().copied().unwrap_or(0.0) / top } else { 0.0 };
    let block_ok = block_ratio > rank_tol;

    let rows = row_space(&jac, rank_tol);
    let sin_min = if rows.ncols() >= dim {
        singular_values(&(rows.transpose() * &span)).get(dim - 1).copied().unwrap_or(0.0)
    } else {
        0.0
    };
    let kernel_overlap = (1.0 - sin_min * sin_min).max(0.0).sqrt();
    let angle_ok = sin_min > rank_tol;

    Ok(TransversalityVerdict {
        transversal: smooth.smooth_reduced.then_some(block_ok),
        tangent_rank,
        block_ratio,
        kernel_overlap,
        borderline: block_ok != angle_ok,
    })
}

/// A point where the restricted Hessian changes sign of determinant.
#[derive(Debug, Clone)]
pub struct DegenerateLocation {
    pub z: CVec,
    pub eigenvalues: Vec<f64>,
    pub bisection_steps: usize,
}

fn det_sign(model: &FoliationModel, g: &MorseModel, z: &CVec) -> Result<f64, PolarError> {
    let h = restricted_hessian(model, g, z).map_err(|e| PolarError::InvalidOptions(e.to_string()))?;
    Ok(h.eigenvalues.iter().product::<f64>().signum())
}

/// Bisects between two contacts whose restricted Hessians have determinants
/// of opposite sign, projecting every midpoint back onto the contact set
/// under `constraints`.
pub fn locate_degenerate_between(
    model: &FoliationModel,
    g: &MorseModel,
    constraints: &[Constraint],
    a: &CVec,
    b: &CVec,
    opts: &SolverOptions,
) -> Result<DegenerateLocation, PolarError> {
    let (mut lo, mut hi) = (a.clone(), b.clone());
    let s_lo = det_sign(model, g, &lo)?;
    if s_lo == det_sign(model, g, &hi)? {
        return Err(PolarError::InvalidOptions("endpoints have equal Hessian determinant sign".into()));
    }
    let mut steps = 0;
    while norm(&(&hi - &lo)) > 1e-13 * norm(&lo).max(1.0) && steps < 200 {
        let mid = (&lo + &hi) * crate::calc::C64::new(0.5, 0.0);
        let out = newton_contact(model, g, constraints, &mid, opts);
        if out.status != NewtonStatus::Converged {
            break;
        }
        if det_sign(model, g, &out.z)? == s_lo {
            lo = out.z;
        } else {
            hi = out.z;
        }
        steps += 1;
    }
    let la = restricted_hessian(model, g, &lo).map_err(|e| PolarError::InvalidOptions(e.to_string()))?;
    let lb = restricted_hessian(model, g, &hi).map_err(|e| PolarError::InvalidOptions(e.to_string()))?;
    let (z, eigenvalues) = if crate::morse::relative_min_eigenvalue(&la.eigenvalues)
        <= crate::morse::relative_min_eigenvalue(&lb.eigenvalues)
    {
        (lo, la.eigenvalues)
    } else {
        (hi, lb.eigenvalues)
    };
    Ok(DegenerateLocation { z, eigenvalues, bisection_steps: steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::{cvec, PolyMap, C64};

    #[test]
    fn fermat_contact_is_transversal() {
        let model =
            FoliationModel::first_integral(PolyMap::fermat(&[C64::new(1., 0.), C64::new(1., 0.)], 3).unwrap()).unwrap();
        let z = cvec(&[(1., 0.), (1., 0.)]) / C64::new(2f64.sqrt(), 0.0);
        let v = is_transversal(&model, &MorseModel::round(2), &z, 1e-8).unwrap();
        assert_eq!(v.transversal, Some(true));
        assert_eq!(v.tangent_rank, 2);
        assert!(!v.borderline);
        assert!(v.kernel_overlap < 1.0 - 1e-6);
    }

    #[test]
    fn non_smooth_contact_is_not_applicable() {
        let model = FoliationModel::linear_field(&[C64::new(1., 0.), C64::new(-1., 0.)]).unwrap();
        let z = cvec(&[(1., 0.), (1., 0.)]);
        let v = is_transversal(&model, &MorseModel::round(2), &z, 1e-8).unwrap();
        assert_eq!(v.transversal, None);
    }
}
