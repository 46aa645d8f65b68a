//! Subcommand implementations.

use crate::config::{ModelSpec, RunConfig};
use foliage::calc::{CVec, MorseModel, C64};
use foliage::experiments::{self, ExperimentError, Params, Report};
use foliage::flow::{integrate_orbit, integrate_orbits, Termination};
use foliage::foliation::{FoliationError, FoliationModel};
use foliage::models::Preset;
use foliage::morse::euler_count;
use foliage::polar::{find_contacts_on_level, find_contacts_on_sphere, ContactSearch, PolarError};
use foliage::sampling::{scale_to_level, sphere_directions};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    CheckFailure,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrorKind,
    pub reason: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    reason: &'a str,
    message: &'a str,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Validation, reason: "validation", message: message.into() }
    }

    pub fn numerical(reason: &'static str, message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, reason, message: message.into() }
    }

    pub fn io(path: &str, e: std::io::Error) -> Self {
        Self { kind: ErrorKind::Validation, reason: "io", message: format!("{path}: {e}") }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Numerical => 2,
            ErrorKind::CheckFailure => 3,
        }
    }

    pub fn to_json(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Validation => "validation",
            ErrorKind::Numerical => "numerical",
            ErrorKind::CheckFailure => "check_failure",
        };
        serde_json::to_string(&ErrorRecord { error: kind, reason: self.reason, message: &self.message })
            .expect("error record serializes")
    }
}

impl From<FoliationError> for CliError {
    fn from(e: FoliationError) -> Self {
        match e {
            FoliationError::Calc(_) | FoliationError::InvalidModel(_) => Self::validation(e.to_string()),
            FoliationError::SingularPoint => Self::numerical("singular_point", e.to_string()),
            FoliationError::DegenerateDistribution { .. } => Self::numerical("degenerate_distribution", e.to_string()),
            FoliationError::NearCritical { .. } => Self::numerical("near_critical", e.to_string()),
        }
    }
}

impl From<PolarError> for CliError {
    fn from(e: PolarError) -> Self {
        match e {
            PolarError::Foliation(f) => f.into(),
            PolarError::OutsideTrustRadius { .. } => Self {
                kind: ErrorKind::Validation,
                reason: "outside_trust_radius",
                message: e.to_string(),
            },
            PolarError::InvalidOptions(_) => Self::validation(e.to_string()),
            PolarError::NotOnContactSet { .. } => Self::numerical("not_on_contact_set", e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::UnknownId(_) => Self { kind: ErrorKind::Validation, reason: "unknown_id", message: e.to_string() },
            ExperimentError::InvalidParams(_) => Self::validation(e.to_string()),
            ExperimentError::Polar(p) => p.into(),
        }
    }
}

/// Exit code and diagnostic lines of a successful run.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: u8,
    pub notes: Vec<String>,
}

fn write_output(path: Option<&str>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != "-" => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e))
        }
    }
}

struct Built {
    model: FoliationModel,
    morse: MorseModel,
}

fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    let model = cfg.model.build().map_err(|e| CliError::validation(e.to_string()))?;
    let morse = MorseModel::from_kind(cfg.model.n(), cfg.morse.clone()).map_err(|e| CliError::validation(e.to_string()))?;
    Ok(Built { model, morse })
}

/// Eigenvalues of a single diagonal linear field with the round metric.
fn poincare_certificate(cfg: &RunConfig) -> Option<bool> {
    match (&cfg.model, &cfg.morse) {
        (ModelSpec::LinearAction { rows }, foliage::calc::MorseKind::Round) if rows.len() == 1 => {
            Some(experiments::poincare_domain(&rows[0]))
        }
        _ => None,
    }
}

fn census_notes(eps: f64, search: &ContactSearch) -> Vec<String> {
    let d = &search.diagnostics;
    let mut notes = vec![format!(
        "summary eps={eps} contacts={} components={} seeds={} converged={} stalled={} max_iterations={} frame_failures={}",
        search.points.len(),
        search.census.len(),
        d.seeds,
        d.converged,
        d.stalled,
        d.max_iterations,
        d.frame_failures
    )];
    for c in &search.census {
        notes.push(format!(
            "component id={} size={} index={} line={} line_fit={:e} transversal={}",
            c.id,
            c.size,
            serde_json::to_string(&c.index_histogram).unwrap_or_default(),
            c.line_flag,
            c.line_fit_residual,
            c.all_transversal
        ));
    }
    notes
}

pub fn analyze(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let b = build(cfg)?;
    let opts = cfg.solver_options();
    let mut lines = String::new();
    let mut outcome = Outcome::default();
    for &eps in &cfg.eps {
        let search = find_contacts_on_sphere(&b.model, &b.morse, eps, cfg.seeds, &opts)?;
        lines.push_str(&search.json_lines());
        outcome.notes.extend(census_notes(eps, &search));
        if search.points.is_empty() {
            match poincare_certificate(cfg) {
                Some(true) => outcome.notes.push(
                    "note empty contact set: eigenvalues in the Poincare domain (0 outside their convex hull), certified empty"
                        .into(),
                ),
                _ if search.diagnostics.converged == 0 => {
                    write_output(cfg.output.as_deref(), &lines)?;
                    return Err(CliError::numerical(
                        "no_convergence",
                        format!("no seed converged on the sphere eps = {eps}"),
                    ));
                }
                _ => {}
            }
        }
    }
    write_output(cfg.output.as_deref(), &lines)?;
    Ok(outcome)
}

pub fn flow(cfg: &RunConfig, starts: &[Vec<C64>]) -> Result<Outcome, CliError> {
    let b = build(cfg)?;
    let n = cfg.model.n();
    let starts: Vec<CVec> = if starts.is_empty() {
        let eps = cfg.eps[0];
        sphere_directions(n, cfg.orbits, cfg.rng_seed)
            .iter()
            .filter_map(|u| scale_to_level(&b.morse, u, eps))
            .collect()
    } else {
        starts
            .iter()
            .map(|s| {
                if s.len() == n {
                    Ok(CVec::from_vec(s.clone()))
                } else {
                    Err(CliError::validation(format!("start point has {} coordinates, model has {n}", s.len())))
                }
            })
            .collect::<Result<_, _>>()?
    };
    if starts.is_empty() {
        return Err(CliError::validation("no starting points"));
    }
    let fo = cfg.flow_options();
    fo.validate().map_err(CliError::validation)?;
    let opts = cfg.solver_options();
    let traces = if starts.len() == 1 {
        vec![integrate_orbit(&b.model, &b.morse, &starts[0], cfg.direction, &fo)]
    } else {
        integrate_orbits(&b.model, &b.morse, &starts, cfg.direction, &fo, &opts)
    };
    let mut lines = String::new();
    let mut verdicts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut conclusive = 0;
    let mut first_error = None;
    for (id, t) in traces.iter().enumerate() {
        match t {
            Ok(t) => {
                lines.push_str(&t.json_lines(id));
                *verdicts.entry(t.termination.label()).or_default() += 1;
                if matches!(t.termination, Termination::Origin | Termination::Contact(_) | Termination::LeafExit) {
                    conclusive += 1;
                }
            }
            Err(e) => {
                *verdicts.entry("error").or_default() += 1;
                first_error.get_or_insert_with(|| e.clone());
            }
        }
    }
    write_output(cfg.output.as_deref(), &lines)?;
    let notes = vec![format!(
        "summary orbits={} verdicts={}",
        traces.len(),
        serde_json::to_string(&verdicts).unwrap_or_default()
    )];
    if conclusive == 0 {
        return Err(match first_error {
            Some(e) => e.into(),
            None => CliError::numerical("no_convergence", "no orbit reached a conclusive verdict"),
        });
    }
    Ok(Outcome { code: 0, notes })
}

pub fn sphere_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let b = build(cfg)?;
    let scan = experiments::sphere_census_scan(&b.model, &b.morse, &cfg.eps, cfg.seeds, &cfg.solver_options())?;
    let mut table = String::from("eps\tcontacts\tcomponents\tindices\tall_transversal\tchanged\n");
    for row in &scan.rows {
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            row.eps,
            row.points,
            row.components.len(),
            row.signature().join(","),
            row.all_transversal,
            scan.changes_at.contains(&row.eps)
        ));
    }
    write_output(cfg.output.as_deref(), &table)?;
    let mut notes = Vec::new();
    if scan.changes_at.is_empty() {
        notes.push("summary census constant across the scan".to_string());
    } else {
        notes.push(format!("summary census changes at eps={:?}", scan.changes_at));
    }
    if scan.rows.iter().all(|r| r.points == 0) && poincare_certificate(cfg) == Some(true) {
        notes.push("note empty contact set: eigenvalues in the Poincare domain, certified empty".into());
    }
    Ok(Outcome { code: 0, notes })
}

pub fn euler(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let b = build(cfg)?;
    let level = cfg
        .level_map()
        .map_err(|e| CliError::validation(e.to_string()))?
        .ok_or_else(|| CliError::validation("euler needs a first integral or a level polynomial"))?;
    if cfg.levels.is_empty() {
        return Err(CliError::validation("no fibre values given (--level)"));
    }
    let opts = cfg.solver_options();
    let mut table = String::from("t_re\tt_im\tcontacts\tindex_histogram\tdegenerate\tsigned_count\n");
    let mut notes = Vec::new();
    let mut failed = 0;
    for &t in &cfg.levels {
        let search = find_contacts_on_level(&b.model, &b.morse, &level, t, cfg.ball_radius, cfg.seeds, &opts)?;
        let mut hist: BTreeMap<String, usize> = BTreeMap::new();
        for p in &search.points {
            *hist.entry(p.morse_index.map_or("degenerate".into(), |i| i.to_string())).or_default() += 1;
        }
        let degenerate = search.points.iter().filter(|p| p.degenerate).count();
        let signed = match euler_count(&search.points) {
            Ok(e) => e.to_string(),
            Err(e) => {
                failed += 1;
                notes.push(format!("note t={t}: {e}"));
                "undefined".into()
            }
        };
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            t.re,
            t.im,
            search.points.len(),
            serde_json::to_string(&hist).unwrap_or_default(),
            degenerate,
            signed
        ));
    }
    write_output(cfg.output.as_deref(), &table)?;
    if failed == cfg.levels.len() {
        return Err(CliError::numerical("degenerate_contacts", "no fibre has a well-defined signed count"));
    }
    Ok(Outcome { code: 0, notes })
}

pub fn bifurcation_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let b = build(cfg)?;
    let level = cfg
        .level_map()
        .map_err(|e| CliError::validation(e.to_string()))?
        .ok_or_else(|| CliError::validation("bifurcation-scan needs a first integral or a level polynomial"))?;
    let preset = Preset { name: "config".into(), model: b.model, morse: b.morse, level: Some(level) };
    let scan =
        experiments::bifurcation_scan(&preset, cfg.t_range.0, cfg.t_range.1, cfg.grid, cfg.seeds, &cfg.solver_options())?;
    let mut rows: Vec<&experiments::ScanRow> = scan.grid.iter().chain(&scan.refined).collect();
    rows.sort_by(|a, b| a.t_abs.total_cmp(&b.t_abs));
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::validation(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
    write_output(cfg.output.as_deref(), &String::from_utf8_lossy(&bytes))?;
    let note = match scan.window {
        Some((lo, hi)) => format!("summary degeneracy window [{lo}, {hi}] midpoint {}", 0.5 * (lo + hi)),
        None => "summary no degeneracy window found".into(),
    };
    Ok(Outcome { code: 0, notes: vec![note] })
}

pub fn reproduce(
    id: &str,
    pairs: Vec<(String, String)>,
    json: Option<&str>,
    contacts: Option<&str>,
    workers: Option<usize>,
    seed: u64,
) -> Result<Outcome, CliError> {
    let params = Params(pairs.into_iter().collect());
    let opts = foliage::polar::SolverOptions { workers, rng_seed: seed, ..Default::default() };
    let report: Report = experiments::reproduce(id, &params, &opts)?;
    write_output(None, &report.render_text())?;
    if let Some(path) = json {
        write_output(Some(path), &report.to_json())?;
    }
    if let Some(path) = contacts {
        write_output(Some(path), &report.contact_lines)?;
    }
    if report.passed() {
        Ok(Outcome::default())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(CliError {
            kind: ErrorKind::CheckFailure,
            reason: "check_failure",
            message: format!("{id}: failed checks: {}", failed.join("; ")),
        })
    }
}

fn render_lines(path: &str, text: &str) -> Result<String, CliError> {
    let values: Vec<serde_json::Value> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::validation(format!("{path}: {e}"))))
        .collect::<Result<_, _>>()?;
    let mut out = format!("{path}\n");
    if values.is_empty() {
        out.push_str("  empty\n");
        return Ok(out);
    }
    if values[0].get("orbit").is_some() {
        let mut last: BTreeMap<u64, &serde_json::Value> = BTreeMap::new();
        for v in &values {
            last.insert(v["orbit"].as_u64().unwrap_or(0), v);
        }
        out.push_str(&format!("  {} orbits, {} samples\n", last.len(), values.len()));
        for (id, v) in last {
            out.push_str(&format!(
                "  orbit {id}: termination={} final_g={} drift={}\n",
                v["termination"].as_str().unwrap_or("?"),
                v["g"],
                v["drift"]
            ));
        }
    } else if values[0].get("z_re").is_some() {
        let mut by_component: BTreeMap<u64, BTreeMap<String, usize>> = BTreeMap::new();
        let mut transversal: BTreeMap<String, usize> = BTreeMap::new();
        let mut worst = 0.0f64;
        for v in &values {
            let index = if v["index"].is_null() { "degenerate".to_string() } else { v["index"].to_string() };
            *by_component.entry(v["component"].as_u64().unwrap_or(0)).or_default().entry(index).or_default() += 1;
            *transversal.entry(v["transversal"].to_string()).or_default() += 1;
            worst = worst.max(v["residual"].as_f64().unwrap_or(f64::NAN));
        }
        out.push_str(&format!("  {} contacts in {} components, max residual {worst:e}\n", values.len(), by_component.len()));
        for (c, hist) in by_component {
            out.push_str(&format!("  component {c}: {}\n", serde_json::to_string(&hist).unwrap_or_default()));
        }
        out.push_str(&format!("  transversal: {}\n", serde_json::to_string(&transversal).unwrap_or_default()));
    } else {
        return Err(CliError::validation(format!("{path}: unrecognised JSON-lines records")));
    }
    Ok(out)
}

fn render_csv(path: &str, text: &str) -> Result<String, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<experiments::ScanRow> =
        reader.deserialize().collect::<Result<_, _>>().map_err(|e| CliError::validation(format!("{path}: {e}")))?;
    let mut out = format!("{path}\n  {} scan rows\n", rows.len());
    if let Some(best) = rows.iter().min_by(|a, b| a.min_rel_eigenvalue.total_cmp(&b.min_rel_eigenvalue)) {
        out.push_str(&format!(
            "  deepest dip at |t| = {} with min relative eigenvalue {:e} ({} contacts, {} degenerate)\n",
            best.t_abs, best.min_rel_eigenvalue, best.contacts, best.degenerate
        ));
    }
    Ok(out)
}

pub fn report(files: &[String]) -> Result<Outcome, CliError> {
    let mut out = String::new();
    for path in files {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if let Ok(report) = serde_json::from_str::<Report>(&text) {
            out.push_str(&report.render_text());
        } else if text.starts_with("t_abs,") {
            out.push_str(&render_csv(path, &text)?);
        } else {
            out.push_str(&render_lines(path, &text)?);
        }
    }
    write_output(None, &out)?;
    Ok(Outcome::default())
}
