//! Scripted reproductions of worked examples, each producing a report of
//! machine-decided checks.

use crate::calc::{norm, CVec, MixedPoly, MixedTerm, MorseModel, C64, I};
use crate::flow::{classify_alpha_limit, integrate_orbit, AlphaLimit, Direction, FlowOptions, Termination};
use crate::foliation::{FoliationError, FoliationModel};
use crate::models::{self, Preset};
use crate::morse::{euler_count, relative_min_eigenvalue};
use crate::polar::{
    describe_contacts, find_contacts_on_level, find_contacts_on_sphere, residual_norm, solve_from_seeds, sphere_seeds,
    ComponentCensus, Constraint, ContactPoint, ContactSearch, PolarError, SolverOptions,
};
use crate::sampling::ball_points;
use crate::transversality::{is_transversal, locate_degenerate_between};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const EXAMPLE_IDS: [&str; 9] = [
    "pham_brieskorn",
    "pham_bifurcation",
    "rotation_degenerate",
    "weighted_quadric",
    "fermat",
    "linear_poincare",
    "linear_siegel",
    "meersseman_action",
    "twisted_cases",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("unknown example id '{0}'")]
    UnknownId(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Polar(#[from] PolarError),
}

impl From<FoliationError> for ExperimentError {
    fn from(e: FoliationError) -> Self {
        Self::Polar(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub tol: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub params: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Every contact located while building the report.
    #[serde(skip)]
    pub contacts: Vec<ContactPoint>,
    /// JSON-lines of the located contacts, in search order.
    #[serde(skip)]
    pub contact_lines: String,
}

impl Report {
    fn new(id: &str, params: &Params) -> Self {
        Self { id: id.to_string(), params: params.0.clone(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn check(&mut self, name: &str, expected: impl ToString, observed: impl ToString, tol: Option<f64>, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            expected: expected.to_string(),
            observed: observed.to_string(),
            tol,
            pass,
        });
    }

    fn check_eq<T: PartialEq + ToString>(&mut self, name: &str, expected: T, observed: T) {
        let pass = expected == observed;
        self.check(name, expected, observed, None, pass);
    }

    fn check_below(&mut self, name: &str, bound: f64, observed: f64) {
        self.check(name, format!("< {bound:e}"), format!("{observed:e}"), Some(bound), observed < bound);
    }

    fn absorb(&mut self, search: &ContactSearch) {
        self.contact_lines.push_str(&search.json_lines());
        self.contacts.extend(search.points.iter().cloned());
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("report {}", self.id);
        if !self.params.is_empty() {
            let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.push_str(&format!(" ({})", p.join(", ")));
        }
        out.push('\n');
        for c in &self.checks {
            let tol = c.tol.map(|t| format!(" tol={t:e}")).unwrap_or_default();
            out.push_str(&format!(
                "  [{}] {}: expected {}, observed {}{}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.observed,
                tol
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out.push_str(&format!(
            "  {} / {} checks passed\n",
            self.checks.iter().filter(|c| c.pass).count(),
            self.checks.len()
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// String-valued experiment parameters with typed accessors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ExperimentError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ExperimentError::InvalidParams(format!("cannot parse {key}='{v}'"))),
        }
    }
}

/// Runs the named reproduction.
pub fn reproduce(id: &str, params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    opts.validate()?;
    match id {
        "pham_brieskorn" => pham_brieskorn(params, opts),
        "pham_bifurcation" => pham_bifurcation(params, opts).map(|(r, _)| r),
        "rotation_degenerate" => rotation_degenerate(params, opts),
        "weighted_quadric" => weighted_quadric(params, opts),
        "fermat" => fermat(params, opts),
        "linear_poincare" => linear_poincare(params, opts),
        "linear_siegel" => linear_siegel(params, opts),
        "meersseman_action" => meersseman_action(params, opts),
        "twisted_cases" => twisted_cases(params, opts),
        other => Err(ExperimentError::UnknownId(other.to_string())),
    }
}

fn max_residual(points: &[ContactPoint]) -> f64 {
    points.iter().map(|p| p.residual_norm).fold(0.0, f64::max)
}

/// Nondegenerate contacts whose index exceeds the leaf dimension.
fn index_bound_violations(points: &[ContactPoint], d: usize) -> usize {
    points.iter().filter(|p| !p.degenerate && p.morse_index.is_some_and(|i| i > d)).count()
}

/// Contacts where nondegeneracy and (smooth and transversal) disagree.
pub fn equivalence_violations(points: &[ContactPoint]) -> usize {
    points.iter().filter(|p| (!p.degenerate) != (p.smooth_reduced && p.transversal == Some(true))).count()
}

fn history_check(report: &mut Report, points: &[ContactPoint], d: usize) {
    report.check_eq("nondegenerate contacts with index > leaf dimension", 0, index_bound_violations(points, d));
}

fn pham_brieskorn(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let p: u32 = params.get("p", 3)?;
    let q: u32 = params.get("q", 4)?;
    let t: f64 = params.get("t", 0.3)?;
    let n_seeds: usize = params.get("seeds", 1500)?;
    if p <= 2 || q <= 2 {
        return Err(ExperimentError::InvalidParams(format!("need p, q > 2, got p = {p}, q = {q}")));
    }
    if t == 0.0 || !t.is_finite() {
        return Err(ExperimentError::InvalidParams("fibre value t must be nonzero".into()));
    }
    let preset = models::pham(p, q)?;
    let level = preset.level.clone().expect("pham level");
    let radius = 1.5 * t.abs().powf(1.0 / p as f64).max(t.abs().powf(1.0 / q as f64));
    let search =
        find_contacts_on_level(&preset.model, &preset.morse, &level, C64::new(t, 0.0), radius, n_seeds, opts)?;
    let mut report = Report::new("pham_brieskorn", params);
    report.absorb(&search);

    let on_axis = |z: &CVec, j: usize| z[j].norm() < 1e-8 * norm(z);
    let first_axis: Vec<&ContactPoint> = search.points.iter().filter(|c| on_axis(&c.z, 1)).collect();
    let second_axis: Vec<&ContactPoint> = search.points.iter().filter(|c| on_axis(&c.z, 0)).collect();
    let rest: Vec<&ContactPoint> = search.points.iter().filter(|c| !on_axis(&c.z, 0) && !on_axis(&c.z, 1)).collect();
    let count_index = |pts: &[&ContactPoint], i: usize| pts.iter().filter(|c| c.morse_index == Some(i)).count();

    report.check_eq("contacts on the z1-axis", p as usize, first_axis.len());
    report.check_eq("index-0 contacts on the z1-axis", p as usize, count_index(&first_axis, 0));
    report.check_eq("contacts on the z2-axis", q as usize, second_axis.len());
    report.check_eq("index-0 contacts on the z2-axis", q as usize, count_index(&second_axis, 0));
    report.check_eq("contacts off the axes", (p * q) as usize, rest.len());
    report.check_eq("index-1 contacts off the axes", (p * q) as usize, count_index(&rest, 1));
    report.check_below("max contact residual", 1e-10, max_residual(&search.points));
    let drift = search
        .points
        .iter()
        .map(|c| (level.eval(&c.z).map(|v| v[0]).unwrap_or(C64::new(f64::NAN, 0.0)) - t).norm())
        .fold(0.0, f64::max);
    report.check_below("max |f - t| at contacts", 1e-10, drift);
    let expected = 1 - (p as i64 - 1) * (q as i64 - 1);
    match euler_count(&search.points) {
        Ok(e) => report.check_eq("signed count on the fibre", expected, e),
        Err(e) => report.check("signed count on the fibre", expected, e, None, false),
    }
    history_check(&mut report, &search.points, 1);
    report.check_eq("index/transversality disagreements", 0, equivalence_violations(&search.points));
    Ok(report)
}

/// One row of a bifurcation scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t_abs: f64,
    pub min_rel_eigenvalue: f64,
    pub contacts: usize,
    pub degenerate: usize,
}

fn bifurcation_row(preset: &Preset, t: f64, n_seeds: usize, opts: &SolverOptions) -> Result<ScanRow, ExperimentError> {
    let level = preset.level.as_ref().expect("level map");
    let radius = 2.0 * t.sqrt().max(t.powf(0.25));
    let search = find_contacts_on_level(&preset.model, &preset.morse, level, C64::new(t, 0.0), radius, n_seeds, opts)?;
    let min_rel = search
        .points
        .iter()
        .map(|p| if p.eigenvalues.is_empty() { 0.0 } else { relative_min_eigenvalue(&p.eigenvalues) })
        .fold(f64::INFINITY, f64::min);
    Ok(ScanRow {
        t_abs: t,
        min_rel_eigenvalue: min_rel,
        contacts: search.points.len(),
        degenerate: search.points.iter().filter(|p| p.degenerate).count(),
    })
}

/// Result of a scan over fibres `f = t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationScan {
    pub grid: Vec<ScanRow>,
    pub refined: Vec<ScanRow>,
    /// `[lo, hi]` on which the minimum relative eigenvalue is below the
    /// degeneracy threshold.
    pub window: Option<(f64, f64)>,
}

impl BifurcationScan {
    pub fn csv(&self) -> String {
        let mut rows: Vec<&ScanRow> = self.grid.iter().chain(&self.refined).collect();
        rows.sort_by(|a, b| a.t_abs.total_cmp(&b.t_abs));
        let mut out = String::from("t_abs,min_rel_eigenvalue,contacts,degenerate\n");
        for r in rows {
            out.push_str(&format!("{},{},{},{}\n", r.t_abs, r.min_rel_eigenvalue, r.contacts, r.degenerate));
        }
        out
    }
}

/// Grid scan of `|t|` followed by golden-section refinement of the deepest
/// dip and bisection of the window edges.
pub fn bifurcation_scan(
    preset: &Preset,
    t_min: f64,
    t_max: f64,
    grid_points: usize,
    n_seeds: usize,
    opts: &SolverOptions,
) -> Result<BifurcationScan, ExperimentError> {
    if !(t_min > 0.0 && t_max > t_min) || grid_points < 3 {
        return Err(ExperimentError::InvalidParams("need 0 < t_min < t_max and at least 3 grid points".into()));
    }
    if preset.level.is_none() {
        return Err(ExperimentError::InvalidParams("bifurcation scan needs a first integral".into()));
    }
    let tol = opts.degeneracy_tol;
    let step = (t_max - t_min) / (grid_points - 1) as f64;
    let grid: Vec<ScanRow> = (0..grid_points)
        .map(|i| bifurcation_row(preset, t_min + step * i as f64, n_seeds, opts))
        .collect::<Result<_, _>>()?;
    let best = (0..grid.len()).min_by(|&a, &b| grid[a].min_rel_eigenvalue.total_cmp(&grid[b].min_rel_eigenvalue)).unwrap();
    let mut refined = Vec::new();
    let eval = |t: f64, refined: &mut Vec<ScanRow>| -> Result<f64, ExperimentError> {
        let row = bifurcation_row(preset, t, n_seeds, opts)?;
        let m = row.min_rel_eigenvalue;
        refined.push(row);
        Ok(m)
    };
    let mut lo = grid[best.saturating_sub(1)].t_abs;
    let mut hi = grid[(best + 1).min(grid.len() - 1)].t_abs;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = eval(x1, &mut refined)?;
    let mut f2 = eval(x2, &mut refined)?;
    while hi - lo > 1e-12 * hi && f1.min(f2) >= tol * 1e-3 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(x1, &mut refined)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(x2, &mut refined)?;
        }
    }
    let (t_star, m_star) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    let window = if m_star < tol {
        // Bisect each edge between the dip and its grid neighbours.
        let edge = |mut inside: f64, mut outside: f64, refined: &mut Vec<ScanRow>| -> Result<f64, ExperimentError> {
            for _ in 0..40 {
                let mid = 0.5 * (inside + outside);
                if eval(mid, refined)? < tol {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            Ok(inside)
        };
        let left = edge(t_star, grid[best.saturating_sub(1)].t_abs, &mut refined)?;
        let right = edge(t_star, grid[(best + 1).min(grid.len() - 1)].t_abs, &mut refined)?;
        Some((left, right))
    } else {
        None
    };
    Ok(BifurcationScan { grid, refined, window })
}

fn pham_bifurcation(params: &Params, opts: &SolverOptions) -> Result<(Report, BifurcationScan), ExperimentError> {
    let q: u32 = params.get("q", 4)?;
    let t_min: f64 = params.get("t_min", 0.05)?;
    let t_max: f64 = params.get("t_max", 0.6)?;
    let grid: usize = params.get("grid", 50)?;
    let n_seeds: usize = params.get("seeds", 300)?;
    if q <= 2 {
        return Err(ExperimentError::InvalidParams(format!("need q > 2, got q = {q}")));
    }
    let preset = models::pham(2, q)?;
    let scan = bifurcation_scan(&preset, t_min, t_max, grid, n_seeds, opts)?;
    let expected = (2.0 / q as f64).powf(q as f64 / (q as f64 - 2.0));
    let mut report = Report::new("pham_bifurcation", params);
    match scan.window {
        Some((lo, hi)) => {
            let mid = 0.5 * (lo + hi);
            report.check("degeneracy window found", "window", format!("[{lo}, {hi}]"), None, true);
            report.check(
                "window midpoint",
                expected,
                mid,
                Some(0.02),
                (mid - expected).abs() < 0.02,
            );
        }
        None => report.check("degeneracy window found", "window", "none", None, false),
    }
    let far: Vec<&ScanRow> = scan.grid.iter().filter(|r| (r.t_abs - expected).abs() > 0.03).collect();
    let inside = far.iter().filter(|r| r.t_abs < expected).all(|r| r.contacts == 2 + q as usize);
    let outside = far.iter().filter(|r| r.t_abs > expected).all(|r| r.contacts == 2 + 3 * q as usize);
    report.check("contacts per fibre inside the window", 2 + q, if inside { 2 + q } else { 0 }, None, inside);
    report.check("contacts per fibre outside the window", 2 + 3 * q, if outside { 2 + 3 * q } else { 0 }, None, outside);
    Ok((report, scan))
}

/// Full scan report plus the scan itself, for the CLI.
pub fn pham_bifurcation_scan(params: &Params, opts: &SolverOptions) -> Result<(Report, BifurcationScan), ExperimentError> {
    pham_bifurcation(params, opts)
}

fn rotation_degenerate(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let n_seeds: usize = params.get("seeds", 300)?;
    let preset = models::rotation()?;
    let search = find_contacts_on_sphere(&preset.model, &preset.morse, 1.0, n_seeds, opts)?;
    let mut report = Report::new("rotation_degenerate", params);
    report.absorb(&search);
    report.check("contacts found", "> 0", search.points.len(), None, !search.points.is_empty());
    let max_rank = search.points.iter().map(|p| p.rank).max().unwrap_or(0);
    report.check_eq("max contact Jacobian rank", 1, max_rank);
    report.check_eq("smooth and reduced contacts", 0, search.points.iter().filter(|p| p.smooth_reduced).count());
    report.check_eq("degenerate contacts", search.points.len(), search.points.iter().filter(|p| p.degenerate).count());
    report.check_eq(
        "transversality applicable",
        0,
        search.points.iter().filter(|p| p.transversal.is_some()).count(),
    );
    // The real part of the residual vanishes identically.
    let probes = ball_points(2, 1.0, 200, opts.rng_seed);
    let re_max = probes
        .iter()
        .filter_map(|z| crate::polar::contact_residual(&preset.model, &preset.morse, z).ok())
        .map(|r| r[0].abs())
        .fold(0.0, f64::max);
    report.check_below("max |Re residual| at random points", 1e-14, re_max);
    Ok(report)
}

fn weighted_quadric(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let n_orbits: usize = params.get("orbits", 100)?;
    let preset = models::weighted_quadric(vec![2.0, 1.0], vec![2.0, 1.0])?;
    let level = preset.level.clone().expect("quadric level");
    let mut report = Report::new("weighted_quadric", params);

    let search = find_contacts_on_level(&preset.model, &preset.morse, &level, C64::new(1.0, 0.0), 2.0, 400, opts)?;
    report.absorb(&search);
    let on_z1 = search.points.iter().filter(|p| p.z[1].norm() < 1e-8).collect::<Vec<_>>();
    let on_z2 = search.points.iter().filter(|p| p.z[0].norm() < 1e-8).collect::<Vec<_>>();
    report.check_eq("contacts on the leaf f = 1", 4, search.points.len());
    report.check_eq("index-1 contacts on the z1-axis", 2, on_z1.iter().filter(|p| p.morse_index == Some(1)).count());
    report.check_eq("index-0 contacts on the z2-axis", 2, on_z2.iter().filter(|p| p.morse_index == Some(0)).count());
    match euler_count(&search.points) {
        Ok(e) => report.check_eq("signed count on the leaf", 0, e),
        Err(e) => report.check("signed count on the leaf", 0, e, None, false),
    }
    let sphere = find_contacts_on_sphere(&preset.model, &preset.morse, 1.0, 400, opts)?;
    report.absorb(&sphere);
    let off_axes = sphere.points.iter().filter(|p| p.z[0].norm() > 1e-8 && p.z[1].norm() > 1e-8).count();
    report.check_eq("sphere contacts off the coordinate axes", 0, off_axes);
    report.check_eq("contact components on the sphere", 2, sphere.census.len());

    let flow = FlowOptions::default();
    let starts = ball_points(2, 1.0, n_orbits, opts.rng_seed.wrapping_add(1));
    let traces = crate::flow::integrate_orbits(&preset.model, &preset.morse, &starts, Direction::Backward, &flow, opts);
    let mut inconclusive = 0;
    let mut non_monotone = 0;
    let mut max_drift = 0.0f64;
    let mut verdicts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &traces {
        match t {
            Ok(t) => {
                *verdicts.entry(t.termination.label()).or_insert(0) += 1;
                if !matches!(t.termination, Termination::Origin | Termination::Contact(_)) {
                    inconclusive += 1;
                }
                if !t.monotone {
                    non_monotone += 1;
                }
                max_drift = max_drift.max(t.invariant_drift.unwrap_or(0.0));
            }
            Err(_) => inconclusive += 1,
        }
    }
    report.check_eq("orbits without origin/contact verdict", 0, inconclusive);
    report.check_eq("orbits with non-monotone g", 0, non_monotone);
    report.check_below("max first-integral drift", 1e-8, max_drift);
    report.notes.push(format!("orbit verdicts: {verdicts:?}"));
    Ok(report)
}

fn lines_count_expected(n: usize, k: u32) -> Option<usize> {
    (n == 2).then_some(k as usize + 2)
}

fn fermat(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let n: usize = params.get("n", 2)?;
    let k: u32 = params.get("k", 3)?;
    let eps: f64 = params.get("eps", 1.0)?;
    let n_seeds: usize = params.get("seeds", if n == 2 { 2000 } else { 1000 })?;
    let det_points: usize = params.get("det_points", 100)?;
    if k <= 2 {
        return Err(ExperimentError::InvalidParams(format!("need k > 2, got k = {k}")));
    }
    if n < 2 {
        return Err(ExperimentError::InvalidParams("need n >= 2".into()));
    }
    let lambda = vec![C64::new(1.0, 0.0); n];
    let preset = models::fermat(&lambda, k)?;
    let search = find_contacts_on_sphere(&preset.model, &preset.morse, eps, n_seeds, opts)?;
    let mut report = Report::new("fermat", params);
    report.absorb(&search);
    let pts = &search.points;
    report.check("contacts found", "> 0", pts.len(), None, !pts.is_empty());
    if let Some(expected) = lines_count_expected(n, k) {
        report.check_eq("components on the sphere", expected, search.census.len());
    }
    let worst_fit = search.census.iter().map(|c| c.line_fit_residual).fold(0.0, f64::max);
    report.check_below("worst complex-line fit residual", crate::polar::LINE_FIT_TOL, worst_fit);
    report.check_eq("contacts not smooth and reduced", 0, pts.iter().filter(|p| !p.smooth_reduced).count());
    report.check_eq("contacts not transversal", 0, pts.iter().filter(|p| p.transversal != Some(true)).count());
    report.check_below("max contact residual", 1e-10, max_residual(pts));

    let mut rng_pick: Vec<&ContactPoint> = pts.iter().filter(|p| p.z[0].norm() > 1e-3 * norm(&p.z)).collect();
    let stride = (rng_pick.len() / det_points.max(1)).max(1);
    rng_pick = rng_pick.into_iter().step_by(stride).take(det_points).collect();
    let mut worst_product = 0.0f64;
    let mut worst_norm_form = 0.0f64;
    for p in &rng_pick {
        let numeric = det_bn_numerical(k, &lambda, &p.z)?;
        let closed = det_bn_closed_form(k, &lambda, &p.z)?;
        worst_product = worst_product.max((closed.product - numeric).norm() / numeric.norm());
        match closed.norm_form {
            Some(nf) => worst_norm_form = worst_norm_form.max((nf - numeric).norm() / numeric.norm()),
            None => worst_norm_form = f64::INFINITY,
        }
    }
    report.check("points used for the determinant check", det_points.min(pts.len()), rng_pick.len(), None, rng_pick.len() >= det_points.min(pts.len()));
    report.check_below("determinant product form, max relative error", 1e-8, worst_product);
    report.check_below("determinant norm form on the contact set, max relative error", 1e-8, worst_norm_form);
    history_check(&mut report, pts, n - 1);
    report.check_eq("index/transversality disagreements", 0, equivalence_violations(pts));
    Ok(report)
}

/// Product and (on the contact set) norm forms of the determinant of the
/// `2(n-1)` block of the contact Jacobian of `sum lambda_j z_j^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetBn {
    pub product: C64,
    /// `None` when `z` is not on the contact set.
    pub norm_form: Option<C64>,
}

fn contact_polys(k: u32, lambda: &[C64]) -> Result<Vec<MixedPoly>, ExperimentError> {
    let n = lambda.len();
    (1..n)
        .map(|j| {
            let mut a = vec![0; n];
            a[0] = k - 1;
            let mut ab = vec![0; n];
            ab[j] = 1;
            let mut b = vec![0; n];
            b[j] = k - 1;
            let mut bb = vec![0; n];
            bb[0] = 1;
            MixedPoly::new(
                n,
                vec![
                    MixedTerm { coeff: lambda[0], z_exps: a, zbar_exps: ab },
                    MixedTerm { coeff: -lambda[j], z_exps: b, zbar_exps: bb },
                ],
            )
            .map_err(|e| ExperimentError::InvalidParams(e.to_string()))
        })
        .collect()
}

fn det_bn_checked(k: u32, lambda: &[C64], z: &CVec) -> Result<(), ExperimentError> {
    if lambda.len() < 2 || z.len() != lambda.len() {
        return Err(ExperimentError::InvalidParams("need n >= 2 and z of length n".into()));
    }
    if k < 2 {
        return Err(ExperimentError::InvalidParams("need k >= 2".into()));
    }
    if z[0].norm() == 0.0 {
        return Err(ExperimentError::InvalidParams("z_1 = 0: re-index so the first coordinate is nonzero".into()));
    }
    Ok(())
}

/// Determinant of the block of `(2 Re G_j, i (G_j - conj G_j))` with respect to
/// `(z_j, conj z_j)`, `j >= 2`, where `G_j = l_1 z_1^(k-1) conj z_j - l_j z_j^(k-1) conj z_1`.
pub fn det_bn_numerical(k: u32, lambda: &[C64], z: &CVec) -> Result<C64, ExperimentError> {
    det_bn_checked(k, lambda, z)?;
    let n = lambda.len();
    let polys = contact_polys(k, lambda)?;
    let size = 2 * (n - 1);
    let mut m = DMatrix::<C64>::zeros(size, size);
    for (row, poly) in polys.iter().enumerate() {
        let d = poly.derivatives(z).map_err(|e| ExperimentError::InvalidParams(e.to_string()))?;
        for j in 1..n {
            let col = 2 * (j - 1);
            // Derivatives of conj G follow from those of G by conjugation.
            let (gz, gzb) = (d.dz[j], d.dzbar[j]);
            let (cgz, cgzb) = (gzb.conj(), gz.conj());
            m[(2 * row, col)] = gz + cgz;
            m[(2 * row, col + 1)] = gzb + cgzb;
            m[(2 * row + 1, col)] = I * (gz - cgz);
            m[(2 * row + 1, col + 1)] = I * (gzb - cgzb);
        }
    }
    Ok(m.determinant())
}

/// Closed forms of `det_bn_numerical`.
pub fn det_bn_closed_form(k: u32, lambda: &[C64], z: &CVec) -> Result<DetBn, ExperimentError> {
    det_bn_checked(k, lambda, z)?;
    let n = lambda.len();
    let two_i = C64::new(0.0, 2.0);
    let km1 = (k - 1) as i32;
    let d = lambda[0] * z[0].powi(km1);
    let mut product = two_i.powi(n as i32 - 1);
    for j in 1..n {
        let cj = lambda[j] * (k - 1) as f64 * z[j].powi(km1 - 1) * z[0].conj();
        product *= d.norm_sqr() - cj.norm_sqr();
    }
    let scale = norm(z).powi(k as i32);
    let on_set = contact_polys(k, lambda)?
        .iter()
        .all(|p| p.eval(z).map(|v| v.norm() <= 1e-10 * scale).unwrap_or(false));
    let norm_form = on_set.then(|| {
        let nonzero = z.iter().filter(|c| c.norm() > 1e-12 * norm(z)).count() as i32;
        let kf = k as f64;
        two_i.powi(n as i32 - 1)
            * lambda[0].norm().powi(2 * (n as i32 - 1))
            * z[0].norm().powi(2 * km1 * (n as i32 - 1))
            * (2.0 * kf - kf * kf).powi(nonzero - 1)
    });
    Ok(DetBn { product, norm_form })
}

/// Whether the convex hull of the eigenvalues misses 0, which makes the
/// round-metric contact set of a single linear field empty.
pub fn poincare_domain(lambda: &[C64]) -> bool {
    if lambda.iter().any(|l| l.norm() == 0.0) {
        return false;
    }
    let mut args: Vec<f64> = lambda.iter().map(|l| l.arg()).collect();
    args.sort_by(|a, b| a.total_cmp(b));
    let tau = std::f64::consts::TAU;
    let max_gap = (0..args.len())
        .map(|i| if i + 1 < args.len() { args[i + 1] - args[i] } else { args[0] + tau - args[i] })
        .fold(0.0, f64::max);
    max_gap > std::f64::consts::PI + 1e-12
}

fn linear_poincare(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let n_seeds: usize = params.get("seeds", 10_000)?;
    let lambda = [C64::new(1.0, 0.0), C64::new(1.0, 1.0)];
    let preset = models::linear(&lambda)?;
    let mut report = Report::new("linear_poincare", params);
    report.check("eigenvalues in the Poincare domain", true, poincare_domain(&lambda), None, poincare_domain(&lambda));
    let search = find_contacts_on_sphere(&preset.model, &preset.morse, 1.0, n_seeds, opts)?;
    report.absorb(&search);
    report.check("seeds tried", format!(">= {n_seeds}"), search.diagnostics.seeds, None, search.diagnostics.seeds >= n_seeds);
    report.check_eq("contacts found", 0, search.points.len());
    let flow = FlowOptions::default();
    let starts = ball_points(2, 1.0, 10, opts.rng_seed);
    let to_origin = starts
        .iter()
        .filter(|z| classify_alpha_limit(&preset.model, &preset.morse, z, &flow) == AlphaLimit::Origin)
        .count();
    report.check_eq("alpha-limits at the origin", starts.len(), to_origin);
    let real = models::linear(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0)])?;
    let z0 = CVec::from_vec(vec![C64::new(0.5, 0.0), C64::new(0.5, 0.0)]);
    let trace = integrate_orbit(&real.model, &real.morse, &z0, Direction::Backward, &flow)?;
    report.check_eq("eigenvalues (1, 2): backward orbit of (0.5, 0.5)", "origin", trace.termination.label());
    Ok(report)
}

fn linear_siegel(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let n_seeds: usize = params.get("seeds", 500)?;
    let eps: f64 = params.get("eps", 1.0)?;
    let preset = models::siegel_cube_roots()?;
    let search = find_contacts_on_sphere(&preset.model, &preset.morse, eps, n_seeds, opts)?;
    let mut report = Report::new("linear_siegel", params);
    report.absorb(&search);
    let diag = CVec::from_element(3, C64::new(eps / 3f64.sqrt(), 0.0));
    let nearest = search.points.iter().map(|p| norm(&(&p.z - &diag))).fold(f64::INFINITY, f64::min);
    report.check("contacts found", "> 0", search.points.len(), None, !search.points.is_empty());
    report.check_below("distance from (1,1,1)eps/sqrt(3) to the contact set", 1e-10, nearest);
    report.check_eq("contacts with Jacobian rank != 2", 0, search.points.iter().filter(|p| p.rank != 2).count());
    report.check_eq("contacts of index != 0", 0, search.points.iter().filter(|p| p.morse_index != Some(0)).count());

    // Several points on one leaf all flow back to a single contact.
    let FoliationModel::LinearAction(l) = &preset.model else { unreachable!() };
    let base = &diag + CVec::from_vec(vec![C64::new(0.01, 0.02), C64::new(-0.015, 0.0), C64::new(0.0, 0.01)]);
    let flow = FlowOptions::default();
    let times = [C64::new(0.3, 0.2), C64::new(-0.4, 0.1), C64::new(0.1, -0.5), C64::new(0.6, 0.6), C64::new(-0.2, -0.3)];
    let mut limits = Vec::new();
    for w in times {
        let z0 = CVec::from_iterator(3, (0..3).map(|j| (l[(0, j)] * w).exp() * base[j]));
        match classify_alpha_limit(&preset.model, &preset.morse, &z0, &flow) {
            AlphaLimit::Contact(p) => limits.push(*p),
            other => report.notes.push(format!("leaf point did not reach a contact: {other:?}")),
        }
    }
    report.check_eq("leaf points with a contact alpha-limit", times.len(), limits.len());
    let distinct = crate::polar::dedup_points(limits.iter().map(|p| p.z.clone()).collect(), 1e-6);
    report.check_eq("distinct contacts on the leaf", 1, distinct.len());
    let leaf = describe_contacts(&preset.model, &preset.morse, distinct, opts);
    match euler_count(&leaf.points) {
        Ok(e) => report.check_eq("signed count on the leaf", 1, e),
        Err(e) => report.check("signed count on the leaf", 1, e, None, false),
    }
    history_check(&mut report, &search.points, 1);
    Ok(report)
}

fn meersseman_action(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let n_seeds: usize = params.get("seeds", 400)?;
    let preset = models::simplex_action(2)?;
    let search = find_contacts_on_sphere(&preset.model, &preset.morse, 1.0, n_seeds, opts)?;
    let mut report = Report::new("meersseman_action", params);
    report.absorb(&search);
    report.check("contacts found", "> 0", search.points.len(), None, !search.points.is_empty());
    report.check_eq("contacts of index != 0", 0, search.points.iter().filter(|p| p.morse_index != Some(0)).count());
    report.check_eq("contacts with Jacobian rank != 4", 0, search.points.iter().filter(|p| p.rank != 4).count());
    report.check_below("max contact residual", 1e-10, max_residual(&search.points));
    history_check(&mut report, &search.points, 2);
    Ok(report)
}

/// The non-transversal contact located in the twisted cycle case.
#[derive(Debug, Clone)]
pub struct TwistedFailure {
    pub z: CVec,
    pub ratio: f64,
    pub transversal: Option<bool>,
}

fn twisted_cases(params: &Params, opts: &SolverOptions) -> Result<Report, ExperimentError> {
    let n_contacts: usize = params.get("contacts", 500)?;
    let mut report = Report::new("twisted_cases", params);
    let l = [C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
    for (label, preset) in [
        ("diagonal", models::twisted_diagonal(l, [2, 3])?),
        ("swapped", models::twisted_swap(l, [2, 3])?),
    ] {
        let search = find_contacts_on_sphere(&preset.model, &preset.morse, 1.0, n_contacts + 100, opts)?;
        report.absorb(&search);
        let used: Vec<&ContactPoint> = search.points.iter().take(n_contacts).collect();
        report.check(
            &format!("{label}: contacts examined"),
            n_contacts,
            used.len(),
            None,
            used.len() >= n_contacts,
        );
        report.check_eq(
            &format!("{label}: contacts not transversal"),
            0,
            used.iter().filter(|p| p.transversal != Some(true)).count(),
        );
    }
    let r_lo = (9.0 - 45f64.sqrt()) / 18.0;
    let r_hi = (9.0 + 45f64.sqrt()) / 18.0;
    match twisted_cycle_failure(params.get("seeds", 800)?, opts)? {
        Some((fail, search)) => {
            report.absorb(&search);
            let dist = (fail.ratio - r_lo).abs().min((fail.ratio - r_hi).abs());
            report.check(
                "cycle: |z2|^2/|z1|^2 at the located contact",
                format!("{r_lo} or {r_hi}"),
                fail.ratio,
                Some(1e-6),
                dist < 1e-6,
            );
            report.check_below("cycle: |z4| at the located contact", 1e-12, fail.z[3].norm());
            report.check(
                "cycle: transversal at the located contact",
                "false",
                format!("{:?}", fail.transversal),
                None,
                fail.transversal == Some(false),
            );
            report.contacts.push(crate::polar::describe_contact(
                &models::twisted_cycle(cycle_lambda())?.model,
                &MorseModel::round(4),
                &fail.z,
                opts,
            ));
        }
        None => report.check("cycle: non-transversal contact located", "found", "none", None, false),
    }
    Ok(report)
}

fn cycle_lambda() -> [C64; 4] {
    [C64::new(3.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)]
}

/// Searches the slice `z_4 = 0` of the unit sphere for contacts of the
/// twisted cycle field and bisects between nearby minima and saddles.
pub fn twisted_cycle_failure(
    n_seeds: usize,
    opts: &SolverOptions,
) -> Result<Option<(TwistedFailure, ContactSearch)>, ExperimentError> {
    let preset = models::twisted_cycle(cycle_lambda())?;
    let seeds: Vec<CVec> = sphere_seeds(&preset.morse, 1.0, n_seeds, opts.rng_seed)
        .into_iter()
        .filter_map(|mut z| {
            z[3] = C64::new(0.0, 0.0);
            let r = norm(&z);
            (r > 1e-8).then(|| z / C64::new(r, 0.0))
        })
        .collect();
    let constraints = [Constraint::Sphere { eps: 1.0 }, Constraint::CoordinateZero { index: 3 }];
    let (zs, diag) = solve_from_seeds(&preset.model, &preset.morse, &constraints, &seeds, 1e-6, opts);
    let mut search = describe_contacts(&preset.model, &preset.morse, zs, opts);
    search.diagnostics = diag;
    let minima: Vec<&ContactPoint> = search.points.iter().filter(|p| p.morse_index == Some(0)).collect();
    let saddles: Vec<&ContactPoint> = search.points.iter().filter(|p| p.morse_index == Some(1)).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in minima.iter().enumerate() {
        for (j, b) in saddles.iter().enumerate() {
            pairs.push((norm(&(&a.z - &b.z)), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(_, i, j) in pairs.iter().take(10) {
        let Ok(loc) = locate_degenerate_between(
            &preset.model,
            &preset.morse,
            &constraints,
            &minima[i].z,
            &saddles[j].z,
            opts,
        ) else {
            continue;
        };
        let z = loc.z;
        let Ok(verdict) = is_transversal(&preset.model, &preset.morse, &z, opts.rank_tol) else { continue };
        let ratio = z[1].norm_sqr() / z[0].norm_sqr();
        return Ok(Some((TwistedFailure { z, ratio, transversal: verdict.transversal }, search)));
    }
    Ok(None)
}

/// Census of contacts on one g-sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusRow {
    pub eps: f64,
    pub points: usize,
    pub components: Vec<ComponentCensus>,
    pub all_transversal: bool,
}

impl CensusRow {
    /// Sorted per-component index labels, used to compare rows.
    pub fn signature(&self) -> Vec<String> {
        let mut s: Vec<String> = self
            .components
            .iter()
            .map(|c| c.uniform_index().map_or("mixed".to_string(), |i| i.to_string()))
            .collect();
        s.sort();
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereCensus {
    pub rows: Vec<CensusRow>,
    /// Radii at which the census differs from the previous one.
    pub changes_at: Vec<f64>,
}

pub fn sphere_census_scan(
    model: &FoliationModel,
    g: &MorseModel,
    eps_list: &[f64],
    n_seeds: usize,
    opts: &SolverOptions,
) -> Result<SphereCensus, ExperimentError> {
    let mut rows: Vec<CensusRow> = Vec::new();
    let mut changes_at = Vec::new();
    for &eps in eps_list {
        let search = find_contacts_on_sphere(model, g, eps, n_seeds, opts)?;
        let row = CensusRow {
            eps,
            points: search.points.len(),
            all_transversal: search.points.iter().all(|p| p.transversal == Some(true)),
            components: search.census,
        };
        if let Some(prev) = rows.last() {
            if prev.signature() != row.signature() {
                changes_at.push(eps);
            }
        }
        rows.push(row);
    }
    Ok(SphereCensus { rows, changes_at })
}

/// Residual at a point, for quick probes.
pub fn residual_at(preset: &Preset, z: &CVec) -> Result<f64, ExperimentError> {
    Ok(residual_norm(&preset.model, &preset.morse, z)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calc::cvec;

    #[test]
    fn det_bn_example_value() {
        let lambda = [C64::new(1., 0.), C64::new(1., 0.)];
        let z = cvec(&[(1., 0.), (1., 0.)]);
        let closed = det_bn_closed_form(3, &lambda, &z).unwrap();
        assert!((closed.product - C64::new(0., -6.)).norm() < 1e-14);
        assert!((closed.norm_form.unwrap() - C64::new(0., -6.)).norm() < 1e-14);
        let numeric = det_bn_numerical(3, &lambda, &z).unwrap();
        assert!((numeric - C64::new(0., -6.)).norm() < 1e-12);
    }

    #[test]
    fn det_bn_vanishes_for_quadrics_on_the_set() {
        let lambda = [C64::new(1., 0.), C64::new(1., 0.)];
        let z = cvec(&[(1., 0.), (1., 0.)]);
        let closed = det_bn_closed_form(2, &lambda, &z).unwrap();
        assert!(closed.norm_form.unwrap().norm() < 1e-14);
        assert!(closed.product.norm() < 1e-14);
    }

    #[test]
    fn det_bn_rejects_zero_first_coordinate() {
        let lambda = [C64::new(1., 0.), C64::new(1., 0.)];
        assert!(det_bn_closed_form(3, &lambda, &cvec(&[(0., 0.), (1., 0.)])).is_err());
    }

    #[test]
    fn poincare_domain_detection() {
        assert!(poincare_domain(&[C64::new(1., 0.), C64::new(1., 1.)]));
        assert!(poincare_domain(&[C64::new(1., 0.), C64::new(2., 0.)]));
        let roots: Vec<C64> = (0..3).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 3.0)).collect();
        assert!(!poincare_domain(&roots));
        assert!(!poincare_domain(&[C64::new(1., 0.), C64::new(-1., 0.)]));
    }

    #[test]
    fn parameter_validation() {
        let opts = SolverOptions::default();
        let err = reproduce("pham_brieskorn", &Params::default().with("p", 2), &opts).unwrap_err();
        assert!(matches!(err, ExperimentError::InvalidParams(_)));
        assert!(matches!(reproduce("nope", &Params::default(), &opts), Err(ExperimentError::UnknownId(_))));
        assert!(matches!(
            reproduce("fermat", &Params::default().with("k", 2), &opts),
            Err(ExperimentError::InvalidParams(_))
        ));
    }
}
