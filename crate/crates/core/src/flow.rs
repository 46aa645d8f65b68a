//! Gradient flow of `g` along the leaves: projected gradient, adaptive
//! Dormand-Prince integration and alpha-limit verdicts.

use crate::calc::{from_real, norm, to_real, CVec, MorseModel, C64};
use crate::foliation::{FoliationError, FoliationModel};
use crate::linalg::{min_norm_solve, real_span};
use crate::polar::{
    contact_jacobian, contact_residual, describe_contact, newton_contact, residual_norm, Constraint, ContactPoint,
    NewtonStatus, SolverOptions,
};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Projection of the gradient of `g` onto the complex leaf tangent space, in
/// interleaved real coordinates.
pub fn leaf_gradient(model: &FoliationModel, g: &MorseModel, z: &CVec) -> Result<Vec<f64>, FoliationError> {
    let frame = model.tangent_basis(z)?;
    let jet = g.jet(z)?;
    let mut v = CVec::zeros(z.len());
    for b in &frame.basis {
        let r: C64 = b.iter().zip(jet.dz.iter()).map(|(bj, dj)| bj * dj).sum();
        v += b * (2.0 * r.conj());
    }
    Ok(to_real(&v))
}

/// Hermitian-orthogonal projection of an arbitrary real vector onto the leaf
/// tangent space at `z`.
pub fn project_to_leaf(model: &FoliationModel, z: &CVec, v: &[f64]) -> Result<Vec<f64>, FoliationError> {
    let frame = model.tangent_basis(z)?;
    let w = from_real(v);
    let mut p = CVec::zeros(z.len());
    for b in &frame.basis {
        p += b * crate::calc::hermitian(&w, b);
    }
    Ok(to_real(&p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    /// Decreasing `g`.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Absolute radii; `None` scales with `eps = sqrt(g(z0))`.
    pub origin_radius: Option<f64>,
    pub exit_radius: Option<f64>,
    pub budget: usize,
    /// Leaf gradient below this fraction of `|grad g|` triggers a contact check.
    pub fixpoint_tol: f64,
    pub drift_tol: f64,
    /// Keep every k-th accepted step in the trace.
    pub sample_every: usize,
    pub min_step: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            origin_radius: None,
            exit_radius: None,
            budget: 1_000_000,
            fixpoint_tol: 1e-6,
            drift_tol: 1e-8,
            sample_every: 1,
            min_step: 1e-14,
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("fixpoint_tol", self.fixpoint_tol),
            ("drift_tol", self.drift_tol),
            ("min_step", self.min_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("origin_radius", self.origin_radius), ("exit_radius", self.exit_radius)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if self.budget == 0 || self.sample_every == 0 {
            return Err("budget and sample_every must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSample {
    pub time: f64,
    pub z: CVec,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Origin,
    Contact(Box<ContactPoint>),
    LeafExit,
    BudgetExhausted,
    Inconclusive(String),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Origin => "origin",
            Self::Contact(_) => "contact",
            Self::LeafExit => "leaf_exit",
            Self::BudgetExhausted => "budget_exhausted",
            Self::Inconclusive(_) => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrbitTrace {
    pub z0: CVec,
    pub direction: Direction,
    pub samples: Vec<OrbitSample>,
    pub termination: Termination,
    /// Max `|f(z_t) - f(z_0)|` for first-integral models.
    pub invariant_drift: Option<f64>,
    /// `g` moved in the flow direction at every accepted step, up to a
    /// relative slack of `1e-12`.
    pub monotone: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleRecord<'a> {
    orbit: usize,
    time: f64,
    z_re: Vec<f64>,
    z_im: Vec<f64>,
    g: f64,
    termination: &'a str,
    drift: Option<f64>,
}

impl OrbitTrace {
    pub fn json_lines(&self, orbit: usize) -> String {
        self.samples
            .iter()
            .map(|s| {
                let rec = SampleRecord {
                    orbit,
                    time: s.time,
                    z_re: s.z.iter().map(|c| c.re).collect(),
                    z_im: s.z.iter().map(|c| c.im).collect(),
                    g: s.g,
                    termination: self.termination.label(),
                    drift: self.invariant_drift,
                };
                serde_json::to_string(&rec).expect("sample serializes") + "\n"
            })
            .collect()
    }

    pub fn is_drift_within(&self, tol: f64) -> bool {
        self.invariant_drift.is_none_or(|d| d < tol)
    }
}

// Autonomous right-hand side, so the stage times are not needed.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    model: &'a FoliationModel,
    g: &'a MorseModel,
    sign: f64,
}

impl Stepper<'_> {
    fn rhs(&self, x: &[f64]) -> Option<Vec<f64>> {
        let v = leaf_gradient(self.model, self.g, &from_real(x)).ok()?;
        Some(v.into_iter().map(|c| self.sign * c).collect())
    }

    /// One Dormand-Prince step; returns the new state and the scaled error.
    fn step(&self, x: &[f64], k1: &[f64], h: f64, rtol: f64, atol: f64) -> Option<(Vec<f64>, f64)> {
        let mut k: Vec<Vec<f64>> = vec![k1.to_vec()];
        for row in A.iter() {
            let stage: Vec<f64> = (0..x.len())
                .map(|i| x[i] + h * row.iter().zip(&k).map(|(a, kj)| a * kj[i]).sum::<f64>())
                .collect();
            k.push(self.rhs(&stage)?);
        }
        // The last stage is evaluated at the fifth-order solution.
        let y5: Vec<f64> =
            (0..x.len()).map(|i| x[i] + h * A[5].iter().zip(&k).map(|(a, kj)| a * kj[i]).sum::<f64>()).collect();
        let mut acc = 0.0;
        for i in 0..x.len() {
            let e = h * E.iter().zip(&k).map(|(c, kj)| c * kj[i]).sum::<f64>();
            let sc = atol + rtol * x[i].abs().max(y5[i].abs());
            acc += (e / sc).powi(2);
        }
        Some((y5, (acc / x.len() as f64).sqrt()))
    }
}

fn try_confirm_contact(
    model: &FoliationModel,
    g: &MorseModel,
    z: &CVec,
    level: Option<C64>,
    solver: &SolverOptions,
) -> Option<ContactPoint> {
    let refined = match (model.first_integral_map(), level) {
        (Some(f), Some(c)) => {
            let constraints = [Constraint::Level { map: f.clone(), value: c }];
            let out = newton_contact(model, g, &constraints, z, solver);
            (out.status == NewtonStatus::Converged).then_some(out.z)?
        }
        _ => leafwise_newton(model, g, z, solver)?,
    };
    if norm(&(&refined - z)) > 1e-3 * norm(z) {
        return None;
    }
    Some(describe_contact(model, g, &refined, solver))
}

/// Newton on the contact residual with steps restricted to the leaf tangent
/// space, so the point stays on its leaf to second order.
fn leafwise_newton(model: &FoliationModel, g: &MorseModel, z: &CVec, solver: &SolverOptions) -> Option<CVec> {
    let mut z = z.clone();
    for _ in 0..solver.max_iter {
        let r = contact_residual(model, g, &z).ok()?;
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res < 1e-3 * solver.tol {
            return Some(z);
        }
        let span = real_span(&model.tangent_basis(&z).ok()?.basis);
        let block = contact_jacobian(model, g, &z).ok()? * &span;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let step = &span * min_norm_solve(&block, &rhs, 1e-10);
        let next = from_real(&to_real(&z).iter().zip(step.iter()).map(|(a, s)| a + s).collect::<Vec<f64>>());
        let next_res = residual_norm(model, g, &next).ok()?;
        if next_res >= res {
            return (res < solver.tol).then_some(z);
        }
        z = next;
    }
    (residual_norm(model, g, &z).ok()? < solver.tol).then_some(z)
}

/// Integrates the leafwise gradient flow from `z0` until a termination event.
pub fn integrate_orbit(
    model: &FoliationModel,
    g: &MorseModel,
    z0: &CVec,
    direction: Direction,
    opts: &FlowOptions,
) -> Result<OrbitTrace, FoliationError> {
    opts.validate().map_err(FoliationError::InvalidModel)?;
    let solver = SolverOptions::default();
    let g0 = g.value(z0)?;
    let eps = g0.max(0.0).sqrt();
    let origin_radius = opts.origin_radius.unwrap_or(1e-4 * eps);
    let exit_radius = opts.exit_radius.unwrap_or(10.0 * eps);
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let level_map = model.first_integral_map();
    let level = match level_map {
        Some(f) => Some(f.eval(z0)?[0]),
        None => None,
    };
    let stepper = Stepper { model, g, sign };

    let mut trace = OrbitTrace {
        z0: z0.clone(),
        direction,
        samples: vec![OrbitSample { time: 0.0, z: z0.clone(), g: g0 }],
        termination: Termination::BudgetExhausted,
        invariant_drift: level.map(|_| 0.0),
        monotone: true,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut x = to_real(z0);
    let mut t = 0.0f64;
    let mut g_cur = g0;
    let mut k1 = leaf_gradient(model, g, z0)?.into_iter().map(|c| sign * c).collect::<Vec<f64>>();
    let grad_norm = |z: &CVec| g.jet(z).map(|j| 2.0 * norm(&j.dz)).unwrap_or(0.0);
    let lg_norm = |k: &[f64]| k.iter().map(|v| v * v).sum::<f64>().sqrt();

    // Fixed point at the start.
    if lg_norm(&k1) < opts.fixpoint_tol * grad_norm(z0) {
        if let Some(p) = try_confirm_contact(model, g, z0, level, &solver) {
            trace.termination = Termination::Contact(Box::new(p));
            return Ok(trace);
        }
    }
    let speed = lg_norm(&k1).max(f64::MIN_POSITIVE);
    let mut h = (1e-3 * norm(z0) / speed).min(1.0);
    let mut last_z = z0.clone();
    loop {
        if trace.accepted_steps >= opts.budget {
            trace.termination = Termination::BudgetExhausted;
            break;
        }
        if h < opts.min_step * (1.0 + t.abs()) {
            trace.termination = Termination::Inconclusive(format!("step size underflow at t = {t:e}"));
            break;
        }
        let Some((mut y, err)) = stepper.step(&x, &k1, h, opts.rtol, opts.atol) else {
            trace.rejected_steps += 1;
            h *= 0.25;
            continue;
        };
        if !(err.is_finite() && err <= 1.0) {
            trace.rejected_steps += 1;
            let f = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.25 };
            h *= f;
            continue;
        }
        // Pull the pivot coordinate back onto the fibre.
        if let (Some(f), Some(c)) = (level_map, level) {
            let z = from_real(&y);
            let pivot = model.pivot(&z)?.unwrap_or(0);
            let fv = f.eval(&z)?[0] - c;
            let fp = f.jacobian(&z)?[(0, pivot)];
            if fp.norm() > 0.0 {
                let mut zc = z;
                zc[pivot] -= fv / fp;
                y = to_real(&zc);
            }
        }
        let z = from_real(&y);
        let g_new = g.value(&z)?;
        let slack = 1e-12 * g_cur.abs().max(f64::MIN_POSITIVE);
        if sign * (g_new - g_cur) < -slack {
            trace.monotone = false;
        }
        t += sign * h;
        x = y;
        g_cur = g_new;
        trace.accepted_steps += 1;
        if let (Some(f), Some(c)) = (level_map, level) {
            let drift = (f.eval(&z)?[0] - c).norm();
            trace.invariant_drift = trace.invariant_drift.map(|d| d.max(drift));
        }
        if trace.accepted_steps.is_multiple_of(opts.sample_every) {
            trace.samples.push(OrbitSample { time: t, z: z.clone(), g: g_new });
        }
        last_z = z.clone();
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);

        let r = norm(&z);
        if r < origin_radius {
            trace.termination = Termination::Origin;
            break;
        }
        if r > exit_radius {
            trace.termination = Termination::LeafExit;
            break;
        }
        k1 = match stepper.rhs(&x) {
            Some(k) => k,
            None => {
                trace.termination = Termination::Inconclusive("tangent frame failed along the orbit".into());
                break;
            }
        };
        if lg_norm(&k1) < opts.fixpoint_tol * grad_norm(&z) {
            if let Some(p) = try_confirm_contact(model, g, &z, level, &solver) {
                trace.termination = Termination::Contact(Box::new(p));
                break;
            }
        }
    }
    if trace.samples.last().is_none_or(|s| s.z != last_z) {
        trace.samples.push(OrbitSample { time: t, z: last_z, g: g_cur });
    }
    Ok(trace)
}

/// Integrates several orbits concurrently; traces are returned sorted by
/// their starting point.
pub fn integrate_orbits(
    model: &FoliationModel,
    g: &MorseModel,
    starts: &[CVec],
    direction: Direction,
    opts: &FlowOptions,
    solver: &SolverOptions,
) -> Vec<Result<OrbitTrace, FoliationError>> {
    let mut sorted: Vec<CVec> = starts.to_vec();
    sorted.sort_by(|a, b| {
        to_real(a).iter().zip(to_real(b)).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    solver.install(|| sorted.par_iter().map(|z| integrate_orbit(model, g, z, direction, opts)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaLimit {
    Origin,
    Contact(Box<ContactPoint>),
    Inconclusive(String),
}

pub fn classify_alpha_limit(model: &FoliationModel, g: &MorseModel, z0: &CVec, opts: &FlowOptions) -> AlphaLimit {
    match integrate_orbit(model, g, z0, Direction::Backward, opts) {
        Ok(trace) => match trace.termination {
            Termination::Origin => AlphaLimit::Origin,
            Termination::Contact(p) => AlphaLimit::Contact(p),
            other => AlphaLimit::Inconclusive(other.label().to_string()),
        },
        Err(e) => AlphaLimit::Inconclusive(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::{cvec, PolyMap, Term};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn radial_field_gradient_is_tangent() {
        let model = FoliationModel::linear_field(&[c(1., 0.), c(1., 0.)]).unwrap();
        let z = cvec(&[(0.3, -0.2), (0.1, 0.4)]);
        let lg = leaf_gradient(&model, &MorseModel::round(2), &z).unwrap();
        let expect = to_real(&(&z * c(2., 0.)));
        assert!(lg.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn rotation_contact_has_zero_gradient() {
        let f = PolyMap::new(2, vec![vec![Term::new(c(-1., 0.), vec![0, 1])], vec![Term::new(c(1., 0.), vec![1, 0])]])
            .unwrap();
        let model = FoliationModel::vector_field(f).unwrap();
        let lg = leaf_gradient(&model, &MorseModel::round(2), &cvec(&[(1., 0.), (1., 0.)])).unwrap();
        assert!(lg.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn poincare_orbit_reaches_origin() {
        let model = FoliationModel::linear_field(&[c(1., 0.), c(2., 0.)]).unwrap();
        let g = MorseModel::round(2);
        let trace = integrate_orbit(&model, &g, &cvec(&[(0.5, 0.), (0.5, 0.)]), Direction::Backward, &FlowOptions::default())
            .unwrap();
        assert_eq!(trace.termination, Termination::Origin);
        assert!(trace.monotone);
        assert!(trace.samples.windows(2).all(|w| w[1].g < w[0].g));
    }

    #[test]
    fn start_on_contact_set_is_a_fixed_point() {
        let model = FoliationModel::first_integral(PolyMap::fermat(&[c(1., 0.), c(1., 0.)], 2).unwrap()).unwrap();
        let g = MorseModel::weighted(vec![2., 1.], vec![2., 1.]).unwrap();
        let trace = integrate_orbit(&model, &g, &cvec(&[(1., 0.), (0., 0.)]), Direction::Backward, &FlowOptions::default())
            .unwrap();
        assert_eq!(trace.samples.len(), 1);
        assert!(matches!(trace.termination, Termination::Contact(_)));
    }

    #[test]
    fn quadric_orbit_ends_at_a_leaf_minimum() {
        let model = FoliationModel::first_integral(PolyMap::fermat(&[c(1., 0.), c(1., 0.)], 2).unwrap()).unwrap();
        let g = MorseModel::weighted(vec![2., 1.], vec![2., 1.]).unwrap();
        let z0 = cvec(&[(0.9, 0.3), (0.2, -0.4)]);
        let trace = integrate_orbit(&model, &g, &z0, Direction::Backward, &FlowOptions::default()).unwrap();
        let Termination::Contact(p) = &trace.termination else { panic!("{:?}", trace.termination) };
        assert_eq!(p.morse_index, Some(0));
        assert!(trace.monotone);
        assert!(trace.invariant_drift.unwrap() < 1e-8);
    }
}
