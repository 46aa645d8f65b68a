//! The polar (contact) set of a foliation against a Morse function: residual
//! equations, their Jacobian, a seeded Newton search and component census.

use crate::calc::{from_real, norm, to_real, CVec, CalcError, MorseModel, PolyMap, C64};
use crate::foliation::{FoliationError, FoliationModel};
use crate::linalg::{min_norm_solve, numerical_rank, singular_values};
use crate::sampling::{ball_points, scale_to_level, sphere_directions, structured_directions};
use crate::{morse, transversality};
use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolarError {
    #[error(transparent)]
    Foliation(#[from] FoliationError),
    #[error("point is not on the contact set: residual {residual:e}")]
    NotOnContactSet { residual: f64 },
    #[error("eps = {eps} exceeds the trust radius {trust_radius}")]
    OutsideTrustRadius { eps: f64, trust_radius: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

impl From<CalcError> for PolarError {
    fn from(e: CalcError) -> Self {
        Self::Foliation(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on the contact residual.
    pub tol: f64,
    pub n_seeds: usize,
    pub trust_radius: f64,
    /// Absolute dedup distance; `None` means `1e-6 * eps`.
    pub dedup: Option<f64>,
    pub rank_tol: f64,
    /// Relative eigenvalue threshold for degeneracy.
    pub degeneracy_tol: f64,
    pub link_scale: f64,
    /// Target spacing, relative to `eps`, for gap filling along curve-like
    /// contact sets on spheres; `0` disables it.
    pub refine_spacing: f64,
    pub max_iter: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            n_seeds: 512,
            trust_radius: 1.0,
            dedup: None,
            rank_tol: 1e-8,
            degeneracy_tol: 1e-7,
            link_scale: 4.0,
            refine_spacing: 0.05,
            max_iter: 80,
            workers: None,
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), PolarError> {
        let positive = [
            ("tol", self.tol),
            ("trust_radius", self.trust_radius),
            ("rank_tol", self.rank_tol),
            ("degeneracy_tol", self.degeneracy_tol),
            ("link_scale", self.link_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PolarError::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(d) = self.dedup {
            if !(d > 0.0 && d.is_finite()) {
                return Err(PolarError::InvalidOptions(format!("dedup must be positive, got {d}")));
            }
        }
        if !(self.refine_spacing >= 0.0 && self.refine_spacing.is_finite()) {
            return Err(PolarError::InvalidOptions(format!(
                "refine_spacing must be non-negative, got {}",
                self.refine_spacing
            )));
        }
        if self.workers == Some(0) {
            return Err(PolarError::InvalidOptions("workers must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(PolarError::InvalidOptions("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Runs `f` inside a pool of the configured size.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match self.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .expect("thread pool")
                .install(f),
            None => f(),
        }
    }
}

/// Extra equations imposed alongside the contact residual.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `g(z) = eps^2`, in relative form.
    Sphere { eps: f64 },
    /// `f(z) = value` for a scalar holomorphic `f`.
    Level { map: PolyMap, value: C64 },
    /// `z_index = 0`.
    CoordinateZero { index: usize },
}

impl Constraint {
    fn eval(&self, g: &MorseModel, z: &CVec, out: &mut Vec<f64>, jac: &mut Vec<Vec<f64>>) -> Result<(), CalcError> {
        let n = z.len();
        match self {
            Self::Sphere { eps } => {
                let e2 = eps * eps;
                let jet = g.jet(z)?;
                out.push((jet.value - e2) / e2);
                jac.push(jet.real_gradient().into_iter().map(|v| v / e2).collect());
            }
            Self::Level { map, value } => {
                let f = map.eval(z)?[0] - value;
                let df = map.jacobian(z)?;
                out.push(f.re);
                out.push(f.im);
                let mut re = vec![0.0; 2 * n];
                let mut im = vec![0.0; 2 * n];
                for l in 0..n {
                    let a = df[(0, l)];
                    re[2 * l] = a.re;
                    re[2 * l + 1] = -a.im;
                    im[2 * l] = a.im;
                    im[2 * l + 1] = a.re;
                }
                jac.push(re);
                jac.push(im);
            }
            Self::CoordinateZero { index } => {
                out.push(z[*index].re);
                out.push(z[*index].im);
                let mut re = vec![0.0; 2 * n];
                let mut im = vec![0.0; 2 * n];
                re[2 * index] = 1.0;
                im[2 * index + 1] = 1.0;
                jac.push(re);
                jac.push(im);
            }
        }
        Ok(())
    }
}

/// `(Re r_1, Im r_1, ..., Re r_d, Im r_d)` with `r_i = sum_j b_ij dg/dz_j`
/// over an orthonormal leaf frame `b`.
pub fn contact_residual(model: &FoliationModel, g: &MorseModel, z: &CVec) -> Result<Vec<f64>, FoliationError> {
    let frame = model.tangent_basis(z)?;
    let jet = g.jet(z)?;
    Ok(frame
        .basis
        .iter()
        .flat_map(|b| {
            let r: C64 = b.iter().zip(jet.dz.iter()).map(|(bj, dj)| bj * dj).sum();
            [r.re, r.im]
        })
        .collect())
}

pub fn residual_norm(model: &FoliationModel, g: &MorseModel, z: &CVec) -> Result<f64, FoliationError> {
    Ok(contact_residual(model, g, z)?.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Real `2d x 2n` Jacobian of `contact_residual`, with the Gram-Schmidt
/// coefficients of the frame frozen at `z`.
pub fn contact_jacobian(model: &FoliationModel, g: &MorseModel, z: &CVec) -> Result<DMatrix<f64>, FoliationError> {
    let frame = model.tangent_basis(z)?;
    let jet = g.jet(z)?;
    let gen_jac = model.generator_jacobians(z, frame.generator_set)?;
    let n = z.len();
    let d = frame.basis.len();
    let zero = C64::new(0.0, 0.0);
    let mut a = DMatrix::from_element(d, n, zero);
    let mut b = DMatrix::from_element(d, n, zero);
    for (m, (gen, gj)) in frame.raw_generators.iter().zip(&gen_jac).enumerate() {
        for l in 0..n {
            let mut ds_dz = zero;
            let mut ds_dzbar = zero;
            for k in 0..n {
                ds_dz += gj[(k, l)] * jet.dz[k] + gen[k] * jet.dzz[(k, l)];
                ds_dzbar += gen[k] * jet.dzzbar[(k, l)];
            }
            for i in 0..d {
                a[(i, l)] += frame.coeffs[(i, m)] * ds_dz;
                b[(i, l)] += frame.coeffs[(i, m)] * ds_dzbar;
            }
        }
    }
    Ok(DMatrix::from_fn(2 * d, 2 * n, |row, col| {
        let (i, l) = (row / 2, col / 2);
        let (s, t) = (a[(i, l)] + b[(i, l)], a[(i, l)] - b[(i, l)]);
        match (row % 2, col % 2) {
            (0, 0) => s.re,
            (1, 0) => s.im,
            (0, _) => -t.im,
            _ => t.re,
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    pub smooth_reduced: bool,
    pub rank: usize,
    pub rank_ratio: f64,
}

/// Residual level below which a point is accepted as lying on the contact set.
pub fn on_set_tolerance(g: &MorseModel, z: &CVec) -> f64 {
    let scale = g.jet(z).map(|j| norm(&j.dz)).unwrap_or(1.0);
    1e-8 * scale.max(1e-300)
}

pub(crate) fn require_on_set(model: &FoliationModel, g: &MorseModel, z: &CVec) -> Result<(), PolarError> {
    let residual = residual_norm(model, g, z)?;
    if residual > on_set_tolerance(g, z) {
        return Err(PolarError::NotOnContactSet { residual });
    }
    Ok(())
}

/// Rank test of the contact Jacobian at a point of the contact set.
pub fn smoothness_check(
    model: &FoliationModel,
    g: &MorseModel,
    z: &CVec,
    rank_tol: f64,
) -> Result<Smoothness, PolarError> {
    require_on_set(model, g, z)?;
    let jac = contact_jacobian(model, g, z)?;
    Ok(smoothness_from_jacobian(&jac, rank_tol))
}

pub(crate) fn smoothness_from_jacobian(jac: &DMatrix<f64>, rank_tol: f64) -> Smoothness {
    let rows = jac.nrows();
    let sv = singular_values(jac);
    let rank = numerical_rank(&sv, rank_tol);
    let top = sv.first().copied().unwrap_or(0.0);
    let low = sv.get(rows - 1).copied().unwrap_or(0.0);
    let rank_ratio = if top > 0.0 { low / top } else { 0.0 };
    Smoothness { smooth_reduced: rank == rows && rank_ratio > rank_tol, rank, rank_ratio }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    MaxIterations,
    /// The iterate reached a point where the frame is undefined.
    FrameFailure,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub z: CVec,
    pub status: NewtonStatus,
    pub iterations: usize,
    pub residual: f64,
    pub constraint_error: f64,
}

struct System {
    values: Vec<f64>,
    jac: DMatrix<f64>,
    residual: f64,
    constraint_error: f64,
}

fn assemble(
    model: &FoliationModel,
    g: &MorseModel,
    constraints: &[Constraint],
    z: &CVec,
    with_jac: bool,
) -> Result<System, FoliationError> {
    let r = contact_residual(model, g, z)?;
    let residual = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut values = r;
    let mut c_rows = Vec::new();
    let mut c_vals = Vec::new();
    for c in constraints {
        c.eval(g, z, &mut c_vals, &mut c_rows)?;
    }
    let constraint_error = c_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values.extend(&c_vals);
    let jac = if with_jac {
        let cj = contact_jacobian(model, g, z)?;
        let n2 = 2 * z.len();
        let mut jac = DMatrix::zeros(cj.nrows() + c_rows.len(), n2);
        jac.rows_mut(0, cj.nrows()).copy_from(&cj);
        for (k, row) in c_rows.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                jac[(cj.nrows() + k, col)] = *v;
            }
        }
        jac
    } else {
        DMatrix::zeros(0, 0)
    };
    Ok(System { values, jac, residual, constraint_error })
}

fn merit(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped minimum-norm Newton iteration on the contact residual together
/// with `constraints`.
pub fn newton_contact(
    model: &FoliationModel,
    g: &MorseModel,
    constraints: &[Constraint],
    seed: &CVec,
    opts: &SolverOptions,
) -> NewtonOutcome {
    let mut x = to_real(seed);
    let fail = |z: CVec, it, status| NewtonOutcome { z, status, iterations: it, residual: f64::NAN, constraint_error: f64::NAN };
    let constraint_tol = opts.tol;
    let mut sys = match assemble(model, g, constraints, seed, true) {
        Ok(s) => s,
        Err(_) => return fail(seed.clone(), 0, NewtonStatus::FrameFailure),
    };
    let mut polish = 0;
    for it in 0..opts.max_iter {
        let converged = sys.residual < opts.tol && sys.constraint_error < constraint_tol;
        if converged {
            // A couple of extra steps push the residual to rounding level.
            if polish >= 2 || sys.residual < 1e-3 * opts.tol {
                return NewtonOutcome {
                    z: from_real(&x),
                    status: NewtonStatus::Converged,
                    iterations: it,
                    residual: sys.residual,
                    constraint_error: sys.constraint_error,
                };
            }
            polish += 1;
        }
        let rhs = DVector::from_iterator(sys.values.len(), sys.values.iter().map(|v| -v));
        let step = min_norm_solve(&sys.jac, &rhs, 1e-10);
        let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let step_norm = step.norm();
        let mut alpha = if step_norm > 0.5 * scale { 0.5 * scale / step_norm } else { 1.0 };
        let m0 = merit(&sys.values);
        let mut accepted = None;
        while alpha > 1e-6 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            let tz = from_real(&trial);
            if let Ok(ts) = assemble(model, g, constraints, &tz, false) {
                if merit(&ts.values) < (1.0 - 1e-4 * alpha) * m0 || (converged && merit(&ts.values) <= m0) {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(trial) => {
                x = trial;
                sys = match assemble(model, g, constraints, &from_real(&x), true) {
                    Ok(s) => s,
                    Err(_) => return fail(from_real(&x), it + 1, NewtonStatus::FrameFailure),
                };
            }
            None => {
                let status = if converged { NewtonStatus::Converged } else { NewtonStatus::Stalled };
                return NewtonOutcome {
                    z: from_real(&x),
                    status,
                    iterations: it,
                    residual: sys.residual,
                    constraint_error: sys.constraint_error,
                };
            }
        }
    }
    let converged = sys.residual < opts.tol && sys.constraint_error < constraint_tol;
    NewtonOutcome {
        z: from_real(&x),
        status: if converged { NewtonStatus::Converged } else { NewtonStatus::MaxIterations },
        iterations: opts.max_iter,
        residual: sys.residual,
        constraint_error: sys.constraint_error,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub seeds: usize,
    pub converged: usize,
    pub max_iterations: usize,
    pub frame_failures: usize,
    pub stalled: usize,
    pub unique: usize,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

/// Sorts lexicographically in real coordinates and drops points within
/// `radius` of an already kept point.
pub fn dedup_points(points: Vec<CVec>, radius: f64) -> Vec<CVec> {
    let mut reals: Vec<Vec<f64>> = points.iter().map(to_real).collect();
    reals.sort_by(|a, b| lex_cmp(a, b));
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for p in reals {
        let dup = kept.iter().rev().take_while(|q| p[0] - q[0] <= radius).any(|q| {
            q.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius
        });
        if !dup {
            kept.push(p);
        }
    }
    kept.iter().map(|p| from_real(p)).collect()
}

/// Runs Newton from every seed and returns the deduplicated solutions.
pub fn solve_from_seeds(
    model: &FoliationModel,
    g: &MorseModel,
    constraints: &[Constraint],
    seeds: &[CVec],
    dedup_radius: f64,
    opts: &SolverOptions,
) -> (Vec<CVec>, SearchDiagnostics) {
    let outcomes: Vec<NewtonOutcome> =
        opts.install(|| seeds.par_iter().map(|s| newton_contact(model, g, constraints, s, opts)).collect());
    let mut diag = SearchDiagnostics { seeds: seeds.len(), ..Default::default() };
    let mut found = Vec::new();
    for o in outcomes {
        match o.status {
            NewtonStatus::Converged => {
                diag.converged += 1;
                found.push(o.z);
            }
            NewtonStatus::MaxIterations => diag.max_iterations += 1,
            NewtonStatus::FrameFailure => diag.frame_failures += 1,
            NewtonStatus::Stalled => diag.stalled += 1,
        }
    }
    let unique = dedup_points(found, dedup_radius);
    diag.unique = unique.len();
    (unique, diag)
}

/// A located contact with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    pub z: CVec,
    /// Value of `g` at `z`.
    pub radius: f64,
    pub residual_norm: f64,
    /// `None` when degenerate or unclassifiable.
    pub morse_index: Option<usize>,
    pub degenerate: bool,
    pub eigenvalues: Vec<f64>,
    pub component_id: usize,
    /// `None` when transversality is not applicable (contact set not smooth).
    pub transversal: Option<bool>,
    pub borderline: bool,
    pub smooth_reduced: bool,
    pub rank: usize,
    pub rank_ratio: f64,
}

/// JSON-lines record of a contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub z_re: Vec<f64>,
    pub z_im: Vec<f64>,
    pub radius: f64,
    pub residual: f64,
    pub index: Option<usize>,
    pub degenerate: bool,
    pub component: usize,
    pub transversal: Option<bool>,
    pub rank_ratio: f64,
}

impl ContactPoint {
    pub fn record(&self) -> ContactRecord {
        ContactRecord {
            z_re: self.z.iter().map(|c| c.re).collect(),
            z_im: self.z.iter().map(|c| c.im).collect(),
            radius: self.radius,
            residual: self.residual_norm,
            index: self.morse_index,
            degenerate: self.degenerate,
            component: self.component_id,
            transversal: self.transversal,
            rank_ratio: self.rank_ratio,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.record()).expect("contact record serializes")
    }
}

/// Classifies a converged point; never fails, marking unclassifiable points
/// as degenerate.
pub fn describe_contact(model: &FoliationModel, g: &MorseModel, z: &CVec, opts: &SolverOptions) -> ContactPoint {
    let radius = g.value(z).unwrap_or(f64::NAN);
    let residual_norm = residual_norm(model, g, z).unwrap_or(f64::NAN);
    let mut point = ContactPoint {
        z: z.clone(),
        radius,
        residual_norm,
        morse_index: None,
        degenerate: true,
        eigenvalues: Vec::new(),
        component_id: 0,
        transversal: None,
        borderline: false,
        smooth_reduced: false,
        rank: 0,
        rank_ratio: 0.0,
    };
    if let Ok(c) = morse::classify_contact(model, g, z, opts.degeneracy_tol) {
        point.morse_index = c.index;
        point.degenerate = c.degenerate;
        point.eigenvalues = c.eigenvalues;
    }
    if let Ok(s) = smoothness_check(model, g, z, opts.rank_tol) {
        point.smooth_reduced = s.smooth_reduced;
        point.rank = s.rank;
        point.rank_ratio = s.rank_ratio;
    }
    if let Ok(t) = transversality::is_transversal(model, g, z, opts.rank_tol) {
        point.transversal = t.transversal;
        point.borderline = t.borderline;
    }
    point
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCensus {
    pub id: usize,
    pub size: usize,
    /// Keys are Morse indices or `"degenerate"`.
    pub index_histogram: BTreeMap<String, usize>,
    pub line_flag: bool,
    pub line_fit_residual: f64,
    pub all_transversal: bool,
}

impl ComponentCensus {
    /// The common index when every point shares one.
    pub fn uniform_index(&self) -> Option<usize> {
        if self.index_histogram.len() == 1 {
            self.index_histogram.keys().next().and_then(|k| k.parse().ok())
        } else {
            None
        }
    }
}

/// Threshold below which a line fit counts as exact.
pub const LINE_FIT_TOL: f64 = 1e-8;

/// Max relative distance of the points from the best complex line through 0.
pub fn line_fit_residual(points: &[CVec]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let n = points[0].len();
    let mut cov = DMatrix::<C64>::zeros(n, n);
    for z in points {
        let u = z / C64::new(norm(z), 0.0);
        cov += &u * u.adjoint();
    }
    let eig = cov.symmetric_eigen();
    let top = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let v = eig.eigenvectors.column(top).into_owned();
    points
        .iter()
        .map(|z| {
            let proj = &v * v.adjoint() * z;
            norm(&(z - proj)) / norm(z)
        })
        .fold(0.0, f64::max)
}

/// Union-find labeling on the proximity graph. Two points link when closer
/// than `link_scale` times the sparsest 3-nearest-neighbour spacing, capped
/// at a fixed fraction of the typical point norm.
/// Cap on the link distance, relative to the median point norm, for samples
/// that were not gap-filled.
pub const DEFAULT_LINK_CAP: f64 = 0.3;

/// Single-linkage clustering. The link distance is `link_scale` times the
/// largest 3rd-nearest-neighbour distance, capped at `cap_fraction` times the
/// median point norm.
pub fn cluster_components(points: &mut [ContactPoint], link_scale: f64, cap_fraction: f64) -> Vec<ComponentCensus> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let reals: Vec<Vec<f64>> = points.iter().map(|p| to_real(&p.z)).collect();
    let dist = |i: usize, j: usize| reals[i].iter().zip(&reals[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let k = 3.min(n - 1);
    let mut spacing = 0.0f64;
    if k > 0 {
        for i in 0..n {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(i, j)).collect();
            d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
            spacing = spacing.max(d[k - 1]);
        }
    }
    let mut norms: Vec<f64> = points.iter().map(|p| norm(&p.z)).collect();
    norms.sort_by(|a, b| a.total_cmp(b));
    let cap = cap_fraction * norms[n / 2];
    let threshold = (link_scale * spacing).min(cap);
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if dist(i, j) < threshold {
                uf.union(i, j);
            }
        }
    }
    // Relabel in order of first appearance for deterministic ids.
    let mut label_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut next = 0;
    for (i, p) in points.iter_mut().enumerate() {
        let root = uf.find(i);
        let id = *label_of_root.entry(root).or_insert_with(|| {
            next += 1;
            next - 1
        });
        p.component_id = id;
    }
    (0..next)
        .map(|id| {
            let members: Vec<&ContactPoint> = points.iter().filter(|p| p.component_id == id).collect();
            let mut index_histogram = BTreeMap::new();
            for p in &members {
                let key = match (p.degenerate, p.morse_index) {
                    (false, Some(i)) => i.to_string(),
                    _ => "degenerate".to_string(),
                };
                *index_histogram.entry(key).or_insert(0) += 1;
            }
            let zs: Vec<CVec> = members.iter().map(|p| p.z.clone()).collect();
            let line_fit_residual = line_fit_residual(&zs);
            ComponentCensus {
                id,
                size: members.len(),
                index_histogram,
                line_flag: line_fit_residual < LINE_FIT_TOL,
                line_fit_residual,
                all_transversal: members.iter().all(|p| p.transversal == Some(true)),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ContactSearch {
    pub points: Vec<ContactPoint>,
    pub census: Vec<ComponentCensus>,
    pub diagnostics: SearchDiagnostics,
}

impl ContactSearch {
    pub fn json_lines(&self) -> String {
        self.points.iter().map(|p| p.to_json_line() + "\n").collect()
    }
}

/// Directions along the solution set of the contact residual plus
/// `constraints` at `z`.
fn solution_tangents(
    model: &FoliationModel,
    g: &MorseModel,
    constraints: &[Constraint],
    z: &CVec,
    rank_tol: f64,
) -> Option<Vec<DVector<f64>>> {
    let sys = assemble(model, g, constraints, z, true).ok()?;
    let gram = sys.jac.transpose() * &sys.jac;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Eigenvalues of the Gram matrix carry rounding of order 1e-16 * top.
    let cutoff = (rank_tol.max(1e-6) * top.sqrt()).powi(2);
    Some(
        (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] <= cutoff)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect(),
    )
}

/// Reseeds along curve-like solution sets (at most two tangent directions):
/// wherever a point has no neighbour within `1.5 * spacing` on one side of a
/// tangent direction, a seed is placed `spacing` away on that side. Repeats
/// until no gap remains or `max_points` is reached.
#[allow(clippy::too_many_arguments)]
fn fill_gaps(
    model: &FoliationModel,
    g: &MorseModel,
    constraints: &[Constraint],
    mut zs: Vec<CVec>,
    spacing: f64,
    dedup_radius: f64,
    max_points: usize,
    opts: &SolverOptions,
    diag: &mut SearchDiagnostics,
) -> (Vec<CVec>, bool) {
    let reach = 1.5 * spacing;
    let mut curve_like = false;
    for _ in 0..64 {
        if zs.len() >= max_points {
            break;
        }
        let reals: Vec<DVector<f64>> = zs.iter().map(|z| DVector::from_vec(to_real(z))).collect();
        let seeds: Vec<CVec> = opts.install(|| {
            (0..zs.len())
                .into_par_iter()
                .flat_map_iter(|i| {
                    let dirs = solution_tangents(model, g, constraints, &zs[i], opts.rank_tol).unwrap_or_default();
                    let dirs = if !dirs.is_empty() && dirs.len() <= 2 { dirs } else { Vec::new() };
                    let xi = &reals[i];
                    let near: Vec<DVector<f64>> = reals
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, xj)| xj - xi)
                        .filter(|d| d.norm() < reach)
                        .collect();
                    let mut out = Vec::new();
                    for v in &dirs {
                        for s in [1.0, -1.0] {
                            let covered = near.iter().any(|d| s * d.dot(v) > 0.3 * d.norm());
                            if !covered {
                                let x = xi + v * (s * spacing);
                                out.push(from_real(x.as_slice()));
                            }
                        }
                    }
                    out
                })
                .collect()
        });
        if seeds.is_empty() {
            break;
        }
        curve_like = true;
        let before = zs.len();
        let (found, extra) = solve_from_seeds(model, g, constraints, &seeds, dedup_radius, opts);
        diag.seeds += extra.seeds;
        diag.converged += extra.converged;
        diag.max_iterations += extra.max_iterations;
        diag.frame_failures += extra.frame_failures;
        diag.stalled += extra.stalled;
        zs.extend(found);
        zs = dedup_points(zs, dedup_radius);
        if zs.len() == before {
            break;
        }
    }
    diag.unique = zs.len();
    (zs, curve_like)
}

fn finish(
    model: &FoliationModel,
    g: &MorseModel,
    zs: Vec<CVec>,
    diagnostics: SearchDiagnostics,
    cap_fraction: f64,
    opts: &SolverOptions,
) -> ContactSearch {
    let mut points: Vec<ContactPoint> =
        opts.install(|| zs.par_iter().map(|z| describe_contact(model, g, z, opts)).collect());
    let census = cluster_components(&mut points, opts.link_scale, cap_fraction);
    ContactSearch { points, census, diagnostics }
}

fn check_model_dims(model: &FoliationModel, g: &MorseModel) -> Result<(), PolarError> {
    if model.ambient_dim() != g.n() {
        return Err(CalcError::DimensionMismatch { expected: model.ambient_dim(), got: g.n() }.into());
    }
    Ok(())
}

/// Seeds on the sphere `{g = eps^2}`: structured directions first, then
/// `n_seeds` low-discrepancy directions.
pub fn sphere_seeds(g: &MorseModel, eps: f64, n_seeds: usize, rng_seed: u64) -> Vec<CVec> {
    let n = g.n();
    structured_directions(n)
        .into_iter()
        .chain(sphere_directions(n, n_seeds, rng_seed))
        .filter_map(|u| scale_to_level(g, &u, eps))
        .collect()
}

/// Contacts on the g-sphere of radius `eps`.
pub fn find_contacts_on_sphere(
    model: &FoliationModel,
    g: &MorseModel,
    eps: f64,
    n_seeds: usize,
    opts: &SolverOptions,
) -> Result<ContactSearch, PolarError> {
    opts.validate()?;
    check_model_dims(model, g)?;
    if !(eps > 0.0) || eps > opts.trust_radius {
        return Err(PolarError::OutsideTrustRadius { eps, trust_radius: opts.trust_radius });
    }
    let seeds = sphere_seeds(g, eps, n_seeds, opts.rng_seed);
    let constraints = [Constraint::Sphere { eps }];
    let dedup = opts.dedup.unwrap_or(1e-6 * eps);
    let (mut zs, mut diag) = solve_from_seeds(model, g, &constraints, &seeds, dedup, opts);
    let mut cap = DEFAULT_LINK_CAP;
    if opts.refine_spacing > 0.0 {
        let (filled, refined) =
            fill_gaps(model, g, &constraints, zs, opts.refine_spacing * eps, dedup, 8 * n_seeds.max(64), opts, &mut diag);
        zs = filled;
        if refined {
            cap = cap.min(2.5 * opts.refine_spacing);
        }
    }
    Ok(finish(model, g, zs, diag, cap, opts))
}

/// Contacts on the leaf `{f = value}` of a scalar first integral, seeded in
/// the ball of radius `ball_radius`.
pub fn find_contacts_on_level(
    model: &FoliationModel,
    g: &MorseModel,
    level: &PolyMap,
    value: C64,
    ball_radius: f64,
    n_seeds: usize,
    opts: &SolverOptions,
) -> Result<ContactSearch, PolarError> {
    opts.validate()?;
    check_model_dims(model, g)?;
    if level.n_in() != model.ambient_dim() || level.n_out() != 1 {
        return Err(PolarError::InvalidOptions("level map must be scalar on the ambient space".into()));
    }
    let seeds = ball_points(model.ambient_dim(), ball_radius, n_seeds, opts.rng_seed);
    let constraints = [Constraint::Level { map: level.clone(), value }];
    let scale = ball_radius.max(f64::MIN_POSITIVE);
    let (zs, diag) = solve_from_seeds(model, g, &constraints, &seeds, opts.dedup.unwrap_or(1e-6 * scale), opts);
    Ok(finish(model, g, zs, diag, DEFAULT_LINK_CAP, opts))
}

/// Classifies and clusters an externally supplied list of contacts.
pub fn describe_contacts(
    model: &FoliationModel,
    g: &MorseModel,
    zs: Vec<CVec>,
    opts: &SolverOptions,
) -> ContactSearch {
    let diagnostics = SearchDiagnostics { seeds: zs.len(), converged: zs.len(), unique: zs.len(), ..Default::default() };
    finish(model, g, zs, diagnostics, DEFAULT_LINK_CAP, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::{cvec, Term};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fermat23() -> FoliationModel {
        FoliationModel::first_integral(PolyMap::fermat(&[c(1., 0.), c(1., 0.)], 3).unwrap()).unwrap()
    }

    fn finite_difference_jacobian(model: &FoliationModel, g: &MorseModel, z: &CVec) -> DMatrix<f64> {
        let x = to_real(z);
        let h = 1e-6;
        let r0 = contact_residual(model, g, z).unwrap();
        let mut jac = DMatrix::zeros(r0.len(), x.len());
        for col in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += h;
            xm[col] -= h;
            let rp = contact_residual(model, g, &from_real(&xp)).unwrap();
            let rm = contact_residual(model, g, &from_real(&xm)).unwrap();
            for row in 0..r0.len() {
                jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn linear_residual_example() {
        let model = FoliationModel::linear_field(&[c(1., 0.), c(2., 0.)]).unwrap();
        let r = contact_residual(&model, &MorseModel::round(2), &cvec(&[(1., 0.), (0., 0.)])).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && r[1].abs() < 1e-15);
    }

    #[test]
    fn fermat_and_pham_residuals_vanish() {
        let g = MorseModel::round(2);
        assert!(residual_norm(&fermat23(), &g, &cvec(&[(1., 0.), (1., 0.)])).unwrap() < 1e-15);
        let pham = PolyMap::new(
            2,
            vec![vec![Term::new(c(4., 0.), vec![0, 3])], vec![Term::new(c(3., 0.), vec![2, 0])]],
        )
        .unwrap();
        let model = FoliationModel::vector_field(pham).unwrap();
        assert!(residual_norm(&model, &g, &cvec(&[(0.7, 0.), (0., 0.)])).unwrap() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences_on_contact_set() {
        let g = MorseModel::round(2);
        // Points away from pivot ties, where the frame is smooth.
        let weighted = FoliationModel::first_integral(PolyMap::fermat(&[c(1., 0.), c(2., 0.)], 3).unwrap()).unwrap();
        for (model, z) in [(fermat23(), cvec(&[(0.8, 0.3), (0., 0.)])), (weighted, cvec(&[(1., 0.), (0.5, 0.)]))] {
            assert!(residual_norm(&model, &g, &z).unwrap() < 1e-14);
            let jac = contact_jacobian(&model, &g, &z).unwrap();
            let fd = finite_difference_jacobian(&model, &g, &z);
            assert!((&jac - &fd).norm() < 1e-7 * fd.norm(), "{jac} vs {fd}");
        }
        let model = fermat23();
        let z = cvec(&[(1., 0.), (1., 0.)]);
        let s = smoothness_check(&model, &g, &(z / c(2f64.sqrt(), 0.)), 1e-8).unwrap();
        assert!(s.smooth_reduced);
        assert_eq!(s.rank, 2);
    }

    #[test]
    fn rank_deficient_examples() {
        let g = MorseModel::round(2);
        let z = cvec(&[(1., 0.), (1., 0.)]) / c(2f64.sqrt(), 0.);
        let hyperbolic = FoliationModel::linear_field(&[c(1., 0.), c(-1., 0.)]).unwrap();
        let s = smoothness_check(&hyperbolic, &g, &z, 1e-8).unwrap();
        assert_eq!(s.rank, 1);
        assert!(!s.smooth_reduced);
        let rotation = PolyMap::new(
            2,
            vec![vec![Term::new(c(-1., 0.), vec![0, 1])], vec![Term::new(c(1., 0.), vec![1, 0])]],
        )
        .unwrap();
        let rotation = FoliationModel::vector_field(rotation).unwrap();
        let s = smoothness_check(&rotation, &g, &z, 1e-8).unwrap();
        assert_eq!(s.rank, 1);
        assert!(!s.smooth_reduced);
    }

    #[test]
    fn smoothness_refuses_points_off_the_set() {
        let model = FoliationModel::linear_field(&[c(1., 0.), c(2., 0.)]).unwrap();
        let err = smoothness_check(&model, &MorseModel::round(2), &cvec(&[(1., 0.), (0., 0.)]), 1e-8).unwrap_err();
        assert!(matches!(err, PolarError::NotOnContactSet { .. }));
    }

    #[test]
    fn newton_lands_on_sphere_and_set() {
        let g = MorseModel::round(2);
        let model = fermat23();
        let seed = cvec(&[(0.8, 0.1), (0.5, -0.3)]);
        let out = newton_contact(&model, &g, &[Constraint::Sphere { eps: 1.0 }], &seed, &SolverOptions::default());
        assert_eq!(out.status, NewtonStatus::Converged);
        assert!(out.residual < 1e-10);
        assert!((g.value(&out.z).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn poincare_sphere_is_empty() {
        let model = FoliationModel::linear_field(&[c(1., 0.), c(1., 1.)]).unwrap();
        let opts = SolverOptions { workers: Some(1), ..Default::default() };
        let search = find_contacts_on_sphere(&model, &MorseModel::round(2), 1.0, 200, &opts).unwrap();
        assert!(search.points.is_empty());
        assert_eq!(search.diagnostics.converged, 0);
    }

    #[test]
    fn dedup_keeps_distinct_points() {
        let a = cvec(&[(1., 0.), (0., 0.)]);
        let b = cvec(&[(1. + 1e-9, 0.), (0., 0.)]);
        let c2 = cvec(&[(0., 0.), (1., 0.)]);
        assert_eq!(dedup_points(vec![a, b, c2], 1e-6).len(), 2);
    }

    #[test]
    fn line_fit_of_a_complex_line() {
        let v = cvec(&[(1., 0.), (0.5, 0.5)]);
        let pts: Vec<CVec> = (0..10).map(|k| &v * C64::from_polar(1.0, k as f64)).collect();
        assert!(line_fit_residual(&pts) < 1e-12);
        let off = vec![v.clone(), cvec(&[(1., 0.), (0., 0.)])];
        assert!(line_fit_residual(&off) > 0.1);
    }

    #[test]
    fn outside_trust_radius_is_rejected() {
        let model = fermat23();
        let err = find_contacts_on_sphere(&model, &MorseModel::round(2), 2.0, 10, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, PolarError::OutsideTrustRadius { .. }));
    }
}
