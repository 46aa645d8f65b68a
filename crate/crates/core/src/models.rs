//! Ready-made foliation models.

use crate::calc::{MorseModel, PolyMap, Term, C64};
use crate::foliation::{FoliationError, FoliationModel};
use nalgebra::DMatrix;

/// A foliation, a Morse function and, when known, a holomorphic first
/// integral whose fibres are the leaves.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub model: FoliationModel,
    pub morse: MorseModel,
    pub level: Option<PolyMap>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mono(n: usize, coeff: C64, exps: &[(usize, u32)]) -> Term {
    let mut e = vec![0; n];
    for &(j, p) in exps {
        e[j] = p;
    }
    Term::new(coeff, e)
}

/// `sum lambda_j z_j^k` as a first integral.
pub fn fermat(lambda: &[C64], k: u32) -> Result<Preset, FoliationError> {
    let f = PolyMap::fermat(lambda, k)?;
    Ok(Preset {
        name: format!("fermat(n={},k={k})", lambda.len()),
        model: FoliationModel::first_integral(f.clone())?,
        morse: MorseModel::round(lambda.len()),
        level: Some(f),
    })
}

/// `F = (q z_2^(q-1), p z_1^(p-1))`, tangent to the fibres of `z_1^p - z_2^q`.
pub fn pham(p: u32, q: u32) -> Result<Preset, FoliationError> {
    let field = PolyMap::new(
        2,
        vec![vec![mono(2, c(q as f64, 0.), &[(1, q - 1)])], vec![mono(2, c(p as f64, 0.), &[(0, p - 1)])]],
    )?;
    let level = PolyMap::new(2, vec![vec![mono(2, c(1., 0.), &[(0, p)]), mono(2, c(-1., 0.), &[(1, q)])]])?;
    Ok(Preset {
        name: format!("pham(p={p},q={q})"),
        model: FoliationModel::vector_field(field)?,
        morse: MorseModel::round(2),
        level: Some(level),
    })
}

/// `F = (-z_2, z_1)`, tangent to the fibres of `z_1^2 + z_2^2`.
pub fn rotation() -> Result<Preset, FoliationError> {
    let field = PolyMap::new(2, vec![vec![mono(2, c(-1., 0.), &[(1, 1)])], vec![mono(2, c(1., 0.), &[(0, 1)])]])?;
    Ok(Preset {
        name: "rotation".into(),
        model: FoliationModel::vector_field(field)?,
        morse: MorseModel::round(2),
        level: Some(PolyMap::fermat(&[c(1., 0.), c(1., 0.)], 2)?),
    })
}

/// Fibres of `z_1^2 + z_2^2` against `sum a_j x_j^2 + b_j y_j^2`.
pub fn weighted_quadric(a: Vec<f64>, b: Vec<f64>) -> Result<Preset, FoliationError> {
    let f = PolyMap::fermat(&[c(1., 0.), c(1., 0.)], 2)?;
    Ok(Preset {
        name: "weighted_quadric".into(),
        model: FoliationModel::first_integral(f.clone())?,
        morse: MorseModel::weighted(a, b)?,
        level: Some(f),
    })
}

/// Diagonal linear vector field with the given eigenvalues.
pub fn linear(lambda: &[C64]) -> Result<Preset, FoliationError> {
    Ok(Preset {
        name: "linear".into(),
        model: FoliationModel::linear_field(lambda)?,
        morse: MorseModel::round(lambda.len()),
        level: None,
    })
}

/// Linear field on `C^3` with the cube roots of unity as eigenvalues.
pub fn siegel_cube_roots() -> Result<Preset, FoliationError> {
    let lambda: Vec<C64> = (0..3).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 3.0)).collect();
    let mut p = linear(&lambda)?;
    p.name = "siegel".into();
    Ok(p)
}

/// Columns are the vertices of a regular simplex centred at the origin of
/// `R^(2m) = C^m`, with `n = 2m + 1` points.
pub fn simplex_action(m: usize) -> Result<Preset, FoliationError> {
    let n = 2 * m + 1;
    // Helmert basis of the hyperplane `sum x = 0` in R^n.
    let coord = |k: usize, j: usize| -> f64 {
        let j1 = j + 1;
        let s = 1.0 / ((j1 * (j1 + 1)) as f64).sqrt();
        if k < j1 {
            s
        } else if k == j1 {
            -(j1 as f64) * s
        } else {
            0.0
        }
    };
    let lambda = DMatrix::from_fn(m, n, |row, k| c(coord(k, 2 * row), coord(k, 2 * row + 1)));
    Ok(Preset {
        name: format!("simplex_action(m={m},n={n})"),
        model: FoliationModel::linear_action(lambda)?,
        morse: MorseModel::round(n),
        level: None,
    })
}

/// `F = (lambda_1 z_1^a_1, lambda_2 z_2^a_2)`.
pub fn twisted_diagonal(lambda: [C64; 2], a: [u32; 2]) -> Result<Preset, FoliationError> {
    let field = PolyMap::new(2, vec![vec![mono(2, lambda[0], &[(0, a[0])])], vec![mono(2, lambda[1], &[(1, a[1])])]])?;
    Ok(Preset {
        name: "twisted_i".into(),
        model: FoliationModel::vector_field(field)?,
        morse: MorseModel::round(2),
        level: None,
    })
}

/// `F = (lambda_1 z_2^a_2, lambda_2 z_1^a_1)`.
pub fn twisted_swap(lambda: [C64; 2], a: [u32; 2]) -> Result<Preset, FoliationError> {
    let field = PolyMap::new(2, vec![vec![mono(2, lambda[0], &[(1, a[1])])], vec![mono(2, lambda[1], &[(0, a[0])])]])?;
    Ok(Preset {
        name: "twisted_ii".into(),
        model: FoliationModel::vector_field(field)?,
        morse: MorseModel::round(2),
        level: None,
    })
}

/// `F = (lambda_1 z_2^2, lambda_2 z_3^2, lambda_3 z_4^2, lambda_4 z_1^2)`.
pub fn twisted_cycle(lambda: [C64; 4]) -> Result<Preset, FoliationError> {
    let comps = (0..4).map(|j| vec![mono(4, lambda[j], &[((j + 1) % 4, 2)])]).collect();
    Ok(Preset {
        name: "twisted_iii".into(),
        model: FoliationModel::vector_field(PolyMap::new(4, comps)?)?,
        morse: MorseModel::round(4),
        level: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::cvec;

    #[test]
    fn pham_field_preserves_its_level() {
        let p = pham(3, 4).unwrap();
        let FoliationModel::VectorField(field) = &p.model else { panic!() };
        let z = cvec(&[(0.3, 0.4), (-0.2, 0.7)]);
        let df = p.level.as_ref().unwrap().jacobian(&z).unwrap();
        let v = field.eval(&z).unwrap();
        assert!((df[(0, 0)] * v[0] + df[(0, 1)] * v[1]).norm() < 1e-14);
    }

    #[test]
    fn simplex_columns_sum_to_zero_and_are_equidistant() {
        let p = simplex_action(2).unwrap();
        let FoliationModel::LinearAction(l) = &p.model else { panic!() };
        for row in 0..2 {
            assert!(l.row(row).iter().sum::<C64>().norm() < 1e-14);
        }
        let col_norm = |k: usize| (0..2).map(|r| l[(r, k)].norm_sqr()).sum::<f64>();
        for k in 1..5 {
            assert!((col_norm(k) - col_norm(0)).abs() < 1e-14);
        }
    }
}
