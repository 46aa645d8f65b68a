//! Small dense linear-algebra helpers shared by the solvers.

use crate::calc::{hermitian, norm, CVec, C64, I};
use nalgebra::{DMatrix, DVector};

/// Result of modified Gram-Schmidt: orthonormal vectors and, for each, its
/// coefficients in terms of the input generators.
pub(crate) struct Orthonormalized {
    pub basis: Vec<CVec>,
    pub coeffs: Vec<Vec<C64>>,
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. A generator is
/// accepted when its remainder keeps more than `rel_tol` of its norm.
pub(crate) fn orthonormalize(gens: &[CVec], max_rank: usize, rel_tol: f64) -> Orthonormalized {
    let mut basis: Vec<CVec> = Vec::with_capacity(max_rank);
    let mut coeffs: Vec<Vec<C64>> = Vec::with_capacity(max_rank);
    for (m, g) in gens.iter().enumerate() {
        if basis.len() == max_rank {
            break;
        }
        let g_norm = norm(g);
        if g_norm < 1e-300 {
            continue;
        }
        let mut v = g.clone();
        let mut c = vec![C64::new(0.0, 0.0); gens.len()];
        c[m] = C64::new(1.0, 0.0);
        for _pass in 0..2 {
            for (b, bc) in basis.iter().zip(&coeffs) {
                let p = hermitian(&v, b);
                v -= b * p;
                for (ci, bci) in c.iter_mut().zip(bc) {
                    *ci -= p * bci;
                }
            }
        }
        let v_norm = norm(&v);
        if v_norm > rel_tol * g_norm {
            let inv = 1.0 / v_norm;
            basis.push(v * C64::new(inv, 0.0));
            coeffs.push(c.into_iter().map(|x| x * inv).collect());
        }
    }
    Orthonormalized { basis, coeffs }
}

/// Singular values in descending order.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * s_max`.
pub(crate) fn numerical_rank(sv: &[f64], rel_tol: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Minimum-norm least-squares solution of `a x = b`, truncating singular
/// values below `rel_cutoff * s_max`.
pub(crate) fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut x = DVector::zeros(a.ncols());
    if top == 0.0 {
        return x;
    }
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cutoff * top {
            let coef = u.column(i).dot(b) / s;
            x += vt.row(i).transpose() * coef;
        }
    }
    x
}

/// Orthonormal basis of the row space of `a` (as columns), keeping singular
/// directions above `rel_tol * s_max`.
pub(crate) fn row_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top > 0.0 && svd.singular_values[i] > rel_tol * top)
        .collect();
    DMatrix::from_fn(a.ncols(), keep.len(), |r, c| vt[(keep[c], r)])
}

/// Real `2n x 2d` matrix whose columns are `b_i` and `i b_i` in interleaved
/// real coordinates.
pub(crate) fn real_span(vectors: &[CVec]) -> DMatrix<f64> {
    let n = vectors.first().map_or(0, |v| v.len());
    let mut m = DMatrix::zeros(2 * n, 2 * vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        for (j, c) in v.iter().enumerate() {
            let ic = I * c;
            m[(2 * j, 2 * i)] = c.re;
            m[(2 * j + 1, 2 * i)] = c.im;
            m[(2 * j, 2 * i + 1)] = ic.re;
            m[(2 * j + 1, 2 * i + 1)] = ic.im;
        }
    }
    m
}

/// Symmetric eigenvalues in ascending order.
pub(crate) fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::cvec;

    #[test]
    fn gram_schmidt_coefficients_reproduce_basis() {
        let gens = vec![cvec(&[(1., 0.), (1., 1.), (0., 0.)]), cvec(&[(0., 2.), (1., 0.), (3., -1.)])];
        let o = orthonormalize(&gens, 2, 1e-10);
        assert_eq!(o.basis.len(), 2);
        for (b, c) in o.basis.iter().zip(&o.coeffs) {
            let rebuilt = gens.iter().zip(c).fold(CVec::zeros(3), |acc, (g, ci)| acc + g * *ci);
            assert!(norm(&(rebuilt - b)) < 1e-14);
        }
        assert!(hermitian(&o.basis[0], &o.basis[1]).norm() < 1e-15);
    }

    #[test]
    fn dependent_generators_are_dropped() {
        let a = cvec(&[(1., 0.), (2., 0.)]);
        let b = &a * C64::new(0.0, 3.0);
        let o = orthonormalize(&[a, b], 2, 1e-10);
        assert_eq!(o.basis.len(), 1);
    }

    #[test]
    fn min_norm_solution_of_wide_system() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = min_norm_solve(&a, &DVector::from_vec(vec![2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
