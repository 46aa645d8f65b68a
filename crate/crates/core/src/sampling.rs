//! Deterministic low-discrepancy seed points.

use crate::calc::{norm, CVec, MorseModel, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(base: u32, mut i: u64) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton sequence with a Cranley-Patterson rotation drawn from `seed`.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    /// # Panics
    /// If `dim` exceeds the built-in prime table.
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} too large");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        Self { shift, index: 1 }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| {
                let x = radical_inverse(p, i) + s;
                x - x.floor()
            })
            .collect()
    }
}

fn gaussian_pairs(u: &[f64]) -> Vec<f64> {
    u.chunks(2)
        .flat_map(|p| {
            let r = (-2.0 * p[0].max(1e-300).ln()).sqrt();
            let t = std::f64::consts::TAU * p[1];
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// `count` unit vectors of `C^n` spread over the sphere `S^{2n-1}`.
pub fn sphere_directions(n: usize, count: usize, seed: u64) -> Vec<CVec> {
    let mut h = Halton::new(2 * n, seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = gaussian_pairs(&h.next_point());
        let v = CVec::from_iterator(n, (0..n).map(|j| C64::new(x[2 * j], x[2 * j + 1])));
        let r = norm(&v);
        if r > 1e-12 {
            out.push(v / C64::new(r, 0.0));
        }
    }
    out
}

/// `count` points filling the Euclidean ball of the given radius.
pub fn ball_points(n: usize, radius: f64, count: usize, seed: u64) -> Vec<CVec> {
    let mut h = Halton::new(2 * n + 1, seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = h.next_point();
        let x = gaussian_pairs(&p[..2 * n]);
        let v = CVec::from_iterator(n, (0..n).map(|j| C64::new(x[2 * j], x[2 * j + 1])));
        let r = norm(&v);
        if r > 1e-12 {
            let s = radius * p[2 * n].powf(1.0 / (2 * n) as f64) / r;
            out.push(v * C64::new(s, 0.0));
        }
    }
    out
}

/// Coordinate axes, the all-ones diagonal and the pairwise diagonals.
pub fn structured_directions(n: usize) -> Vec<CVec> {
    let one = C64::new(1.0, 0.0);
    let mut out = Vec::new();
    for j in 0..n {
        let mut v = CVec::zeros(n);
        v[j] = one;
        out.push(v);
    }
    out.push(CVec::from_element(n, one / (n as f64).sqrt()));
    let s = 1.0 / 2f64.sqrt();
    for j in 0..n {
        for k in (j + 1)..n {
            for sign in [1.0, -1.0] {
                let mut v = CVec::zeros(n);
                v[j] = C64::new(s, 0.0);
                v[k] = C64::new(sign * s, 0.0);
                out.push(v);
            }
        }
    }
    out
}

/// Moves `u` along its ray onto `{g = eps^2}`.
pub fn scale_to_level(g: &MorseModel, u: &CVec, eps: f64) -> Option<CVec> {
    let target = eps * eps;
    let gu = g.value(u).ok()?;
    if gu <= 0.0 {
        return None;
    }
    let mut s = eps / gu.sqrt();
    // Exact for quadratic g; a few radial Newton steps otherwise.
    for _ in 0..50 {
        let z = u * C64::new(s, 0.0);
        let jet = g.jet(&z).ok()?;
        let err = jet.value - target;
        if err.abs() <= 1e-15 * target {
            break;
        }
        let radial: f64 = jet.real_gradient().iter().zip(crate::calc::to_real(u)).map(|(a, b)| a * b).sum();
        if radial <= 0.0 {
            return None;
        }
        s -= err / radial;
        if s <= 0.0 {
            return None;
        }
    }
    Some(u * C64::new(s, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(2, 1), 0.5);
        assert_eq!(radical_inverse(2, 3), 0.75);
        assert_eq!(radical_inverse(3, 4), 4.0 / 9.0);
    }

    #[test]
    fn directions_are_unit_and_deterministic() {
        let a = sphere_directions(3, 50, 7);
        let b = sphere_directions(3, 50, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (norm(v) - 1.0).abs() < 1e-14));
        assert_ne!(a, sphere_directions(3, 50, 8));
    }

    #[test]
    fn ball_points_stay_inside() {
        assert!(ball_points(2, 0.5, 200, 1).iter().all(|v| norm(v) <= 0.5 + 1e-15));
    }

    #[test]
    fn scaling_hits_weighted_level() {
        let g = MorseModel::weighted(vec![2.0, 1.0], vec![3.0, 1.0]).unwrap();
        let u = CVec::from_vec(vec![C64::new(0.3, -0.2), C64::new(0.1, 0.7)]);
        let z = scale_to_level(&g, &u, 0.5).unwrap();
        assert!((g.value(&z).unwrap() - 0.25).abs() < 1e-15);
    }
}
