//! Run configuration and its flat `key=value` file format.
//!
//! Polynomials are written as repeated `term=` lines, each holding the real
//! and imaginary part of the coefficient followed by the exponents. A
//! `component=` line starts the next component of a polynomial map.

use foliage::calc::{MixedTerm, MorseKind, PolyMap, Term, C64};
use foliage::flow::{Direction, FlowOptions};
use foliage::foliation::FoliationModel;
use foliage::polar::SolverOptions;
use nalgebra::DMatrix;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax { line, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Components of `F: C^n -> C^n`.
    VectorField { n: usize, components: Vec<Vec<Term>> },
    /// The scalar first integral `f: C^n -> C`.
    FirstIntegral { n: usize, terms: Vec<Term> },
    /// Rows of the `m x n` matrix of a diagonal linear `C^m`-action.
    LinearAction { rows: Vec<Vec<C64>> },
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        match self {
            Self::VectorField { n, .. } | Self::FirstIntegral { n, .. } => *n,
            Self::LinearAction { rows } => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::VectorField { .. } => "vector_field",
            Self::FirstIntegral { .. } => "first_integral",
            Self::LinearAction { .. } => "linear_action",
        }
    }

    pub fn build(&self) -> Result<FoliationModel, ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        match self {
            Self::VectorField { n, components } => {
                let f = PolyMap::new(*n, components.clone()).map_err(|e| invalid(&e))?;
                FoliationModel::vector_field(f).map_err(|e| invalid(&e))
            }
            Self::FirstIntegral { n, terms } => {
                let f = PolyMap::new(*n, vec![terms.clone()]).map_err(|e| invalid(&e))?;
                FoliationModel::first_integral(f).map_err(|e| invalid(&e))
            }
            Self::LinearAction { rows } => {
                let n = self.n();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(ConfigError::Invalid("matrix rows of unequal length".into()));
                }
                let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
                FoliationModel::linear_action(m).map_err(|e| invalid(&e))
            }
        }
    }

    /// Reads a model back into its serializable description.
    pub fn from_model(model: &FoliationModel) -> Self {
        match model {
            FoliationModel::VectorField(f) => {
                Self::VectorField { n: f.n_in(), components: f.components().to_vec() }
            }
            FoliationModel::FirstIntegral(f) => {
                Self::FirstIntegral { n: f.n_in(), terms: f.components()[0].clone() }
            }
            FoliationModel::LinearAction(l) => {
                Self::LinearAction { rows: (0..l.nrows()).map(|i| l.row(i).iter().copied().collect()).collect() }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Analyze,
    Flow,
    SphereScan,
    Euler,
    BifurcationScan,
}

impl CommandKind {
    pub const ALL: [CommandKind; 5] =
        [Self::Analyze, Self::Flow, Self::SphereScan, Self::Euler, Self::BifurcationScan];

    pub fn name(self) -> &'static str {
        match self {
            Self::Analyze => "analyze",
            Self::Flow => "flow",
            Self::SphereScan => "sphere-scan",
            Self::Euler => "euler",
            Self::BifurcationScan => "bifurcation-scan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: ModelSpec,
    pub morse: MorseKind,
    /// Holomorphic function whose fibres are the leaves, for commands that
    /// work leaf by leaf.
    pub level: Option<Vec<Term>>,
    /// One radius for `analyze` and `flow`, a decreasing list for `sphere-scan`.
    pub eps: Vec<f64>,
    /// Fibre values for `euler`.
    pub levels: Vec<C64>,
    /// Seed-ball radius for fibre searches.
    pub ball_radius: f64,
    pub tol: f64,
    pub seeds: usize,
    pub trust_radius: f64,
    pub dedup: Option<f64>,
    pub rank_tol: f64,
    pub origin_radius: Option<f64>,
    pub exit_radius: Option<f64>,
    pub budget: usize,
    pub drift_tol: f64,
    pub orbits: usize,
    pub direction: Direction,
    /// `|t|` range and grid size for `bifurcation-scan`.
    pub t_range: (f64, f64),
    pub grid: usize,
    pub output: Option<String>,
    pub workers: Option<usize>,
    pub rng_seed: u64,
}

impl RunConfig {
    pub fn new(command: CommandKind, model: ModelSpec, morse: MorseKind) -> Self {
        let solver = SolverOptions::default();
        let flow = FlowOptions::default();
        Self {
            command,
            model,
            morse,
            level: None,
            eps: vec![1.0],
            levels: Vec::new(),
            ball_radius: 2.0,
            tol: solver.tol,
            seeds: solver.n_seeds,
            trust_radius: solver.trust_radius,
            dedup: solver.dedup,
            rank_tol: solver.rank_tol,
            origin_radius: flow.origin_radius,
            exit_radius: flow.exit_radius,
            budget: flow.budget,
            drift_tol: flow.drift_tol,
            orbits: 10,
            direction: Direction::Backward,
            t_range: (0.05, 0.6),
            grid: 50,
            output: None,
            workers: None,
            rng_seed: solver.rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (name, v) in [("tol", self.tol), ("trust_radius", self.trust_radius), ("rank_tol", self.rank_tol), ("drift_tol", self.drift_tol), ("ball_radius", self.ball_radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("dedup", self.dedup), ("origin_radius", self.origin_radius), ("exit_radius", self.exit_radius)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if self.eps.is_empty() {
            return bad("eps list is empty".into());
        }
        for &e in &self.eps {
            if !(e > 0.0) || e > self.trust_radius {
                return bad(format!("eps = {e} outside (0, trust_radius = {}]", self.trust_radius));
            }
        }
        if self.command == CommandKind::SphereScan && self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad("sphere-scan needs a strictly decreasing eps list".into());
        }
        if self.seeds == 0 || self.budget == 0 {
            return bad("seeds and budget must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if !(self.t_range.0 > 0.0 && self.t_range.1 > self.t_range.0) || self.grid < 3 {
            return bad("need 0 < t_min < t_max and grid >= 3".into());
        }
        if self.model.n() < 2 {
            return bad("model needs at least two variables".into());
        }
        if let Some(level) = &self.level {
            if level.iter().any(|t| t.exps.len() != self.model.n()) {
                return bad("level polynomial has the wrong number of variables".into());
            }
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            n_seeds: self.seeds,
            trust_radius: self.trust_radius,
            dedup: self.dedup,
            rank_tol: self.rank_tol,
            workers: self.workers,
            rng_seed: self.rng_seed,
            ..SolverOptions::default()
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            origin_radius: self.origin_radius,
            exit_radius: self.exit_radius,
            budget: self.budget,
            drift_tol: self.drift_tol,
            ..FlowOptions::default()
        }
    }

    /// The level polynomial, falling back to the first integral itself.
    pub fn level_map(&self) -> Result<Option<PolyMap>, ConfigError> {
        let terms = match (&self.level, &self.model) {
            (Some(t), _) => t.clone(),
            (None, ModelSpec::FirstIntegral { terms, .. }) => terms.clone(),
            _ => return Ok(None),
        };
        PolyMap::new(self.model.n(), vec![terms]).map(Some).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
        kv("command", self.command.name().into());
        kv("model", self.model.kind_name().into());
        kv("n", self.model.n().to_string());
        match &self.model {
            ModelSpec::VectorField { components, .. } => {
                for comp in components {
                    kv("component", String::new());
                    for t in comp {
                        kv("term", term_text(t));
                    }
                }
            }
            ModelSpec::FirstIntegral { terms, .. } => {
                for t in terms {
                    kv("term", term_text(t));
                }
            }
            ModelSpec::LinearAction { rows } => {
                for r in rows {
                    kv("row", join(r.iter().flat_map(|c| [c.re, c.im])));
                }
            }
        }
        if let Some(level) = &self.level {
            kv("level", String::new());
            for t in level {
                kv("level_term", term_text(t));
            }
        }
        match &self.morse {
            MorseKind::Round => kv("morse", "round".into()),
            MorseKind::Weighted { a, b } => {
                kv("morse", "weighted".into());
                kv("morse_a", join(a.iter().copied()));
                kv("morse_b", join(b.iter().copied()));
            }
            MorseKind::General { terms } => {
                kv("morse", "general".into());
                for t in terms {
                    let mut parts = vec![t.coeff.re.to_string(), t.coeff.im.to_string()];
                    parts.extend(t.z_exps.iter().chain(&t.zbar_exps).map(u32::to_string));
                    kv("morse_term", parts.join(" "));
                }
            }
        }
        kv("eps", join(self.eps.iter().copied()));
        kv("levels", join(self.levels.iter().flat_map(|c| [c.re, c.im])));
        kv("ball_radius", self.ball_radius.to_string());
        kv("tol", self.tol.to_string());
        kv("seeds", self.seeds.to_string());
        kv("trust_radius", self.trust_radius.to_string());
        kv("dedup", opt_text(self.dedup));
        kv("rank_tol", self.rank_tol.to_string());
        kv("origin_radius", opt_text(self.origin_radius));
        kv("exit_radius", opt_text(self.exit_radius));
        kv("budget", self.budget.to_string());
        kv("drift_tol", self.drift_tol.to_string());
        kv("orbits", self.orbits.to_string());
        kv("direction", match self.direction { Direction::Forward => "forward", Direction::Backward => "backward" }.into());
        kv("t_range", join([self.t_range.0, self.t_range.1]));
        kv("grid", self.grid.to_string());
        kv("output", self.output.clone().unwrap_or_else(|| "none".into()));
        kv("workers", opt_text(self.workers));
        kv("rng_seed", self.rng_seed.to_string());
        out
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw: Vec<(usize, &str, &str)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| syntax(i + 1, "expected key=value"))?;
            raw.push((i + 1, k.trim(), v.trim()));
        }
        let single = |key: &str| -> Result<Option<(usize, &str)>, ConfigError> {
            let mut hits = raw.iter().filter(|(_, k, _)| *k == key);
            let first = hits.next().map(|(l, _, v)| (*l, *v));
            if let Some((l, _, _)) = hits.next() {
                return Err(syntax(*l, format!("duplicate key '{key}'")));
            }
            Ok(first)
        };
        let required = |key: &str| single(key)?.ok_or_else(|| ConfigError::Invalid(format!("missing key '{key}'")));

        let (l, v) = required("command")?;
        let command = CommandKind::parse(v).ok_or_else(|| syntax(l, format!("unknown command '{v}'")))?;
        let (l, v) = required("n")?;
        let n: usize = parse_num(l, v)?;
        let (l, kind) = required("model")?;

        let mut components: Vec<Vec<Term>> = Vec::new();
        let mut terms = Vec::new();
        let mut rows = Vec::new();
        let mut level: Option<Vec<Term>> = None;
        let mut morse_terms = Vec::new();
        for &(line, k, v) in &raw {
            match k {
                "component" => components.push(Vec::new()),
                "term" => {
                    let t = parse_term(line, v, n)?;
                    match components.last_mut() {
                        Some(c) if kind == "vector_field" => c.push(t),
                        _ if kind == "vector_field" => return Err(syntax(line, "term before any component")),
                        _ => terms.push(t),
                    }
                }
                "row" => {
                    let x: Vec<f64> = parse_list(line, v)?;
                    if !x.len().is_multiple_of(2) {
                        return Err(syntax(line, "row needs real/imaginary pairs"));
                    }
                    rows.push(x.chunks(2).map(|p| C64::new(p[0], p[1])).collect::<Vec<_>>());
                }
                "level" => {
                    if level.is_some() {
                        return Err(syntax(line, "duplicate key 'level'"));
                    }
                    level = Some(Vec::new());
                }
                "level_term" => {
                    let t = parse_term(line, v, n)?;
                    level.as_mut().ok_or_else(|| syntax(line, "level_term before level"))?.push(t);
                }
                "morse_term" => {
                    let x: Vec<&str> = v.split_whitespace().collect();
                    if x.len() != 2 + 2 * n {
                        return Err(syntax(line, format!("morse_term needs 2 + {} fields", 2 * n)));
                    }
                    let coeff = C64::new(parse_num(line, x[0])?, parse_num(line, x[1])?);
                    let exps = x[2..].iter().map(|e| parse_num(line, e)).collect::<Result<Vec<u32>, _>>()?;
                    morse_terms.push(MixedTerm { coeff, z_exps: exps[..n].to_vec(), zbar_exps: exps[n..].to_vec() });
                }
                _ => {}
            }
        }
        let model = match kind {
            "vector_field" => ModelSpec::VectorField { n, components },
            "first_integral" => ModelSpec::FirstIntegral { n, terms },
            "linear_action" => ModelSpec::LinearAction { rows },
            other => return Err(syntax(l, format!("unknown model kind '{other}'"))),
        };

        let (l, v) = required("morse")?;
        let morse = match v {
            "round" => MorseKind::Round,
            "weighted" => {
                let (la, a) = required("morse_a")?;
                let (lb, b) = required("morse_b")?;
                MorseKind::Weighted { a: parse_list(la, a)?, b: parse_list(lb, b)? }
            }
            "general" => MorseKind::General { terms: morse_terms },
            other => return Err(syntax(l, format!("unknown morse kind '{other}'"))),
        };

        let mut cfg = RunConfig::new(command, model, morse);
        cfg.level = level;
        const KNOWN: [&str; 31] = [
            "command", "model", "n", "component", "term", "row", "level", "level_term", "morse", "morse_a", "morse_b",
            "morse_term", "eps", "levels", "ball_radius", "tol", "seeds", "trust_radius", "dedup", "rank_tol",
            "origin_radius", "exit_radius", "budget", "drift_tol", "orbits", "direction", "t_range", "grid", "output",
            "workers", "rng_seed",
        ];
        if let Some((l, k, _)) = raw.iter().find(|(_, k, _)| !KNOWN.contains(k)) {
            return Err(syntax(*l, format!("unknown key '{k}'")));
        }
        if let Some((l, v)) = single("eps")? {
            cfg.eps = parse_list(l, v)?;
        }
        if let Some((l, v)) = single("levels")? {
            let x: Vec<f64> = parse_list(l, v)?;
            if !x.len().is_multiple_of(2) {
                return Err(syntax(l, "levels needs real/imaginary pairs"));
            }
            cfg.levels = x.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        }
        macro_rules! scalar {
            ($key:literal, $field:expr) => {
                if let Some((l, v)) = single($key)? {
                    $field = parse_num(l, v)?;
                }
            };
        }
        macro_rules! optional {
            ($key:literal, $field:expr) => {
                if let Some((l, v)) = single($key)? {
                    $field = if v == "none" { None } else { Some(parse_num(l, v)?) };
                }
            };
        }
        scalar!("ball_radius", cfg.ball_radius);
        scalar!("tol", cfg.tol);
        scalar!("seeds", cfg.seeds);
        scalar!("trust_radius", cfg.trust_radius);
        optional!("dedup", cfg.dedup);
        scalar!("rank_tol", cfg.rank_tol);
        optional!("origin_radius", cfg.origin_radius);
        optional!("exit_radius", cfg.exit_radius);
        scalar!("budget", cfg.budget);
        scalar!("drift_tol", cfg.drift_tol);
        scalar!("orbits", cfg.orbits);
        scalar!("grid", cfg.grid);
        optional!("workers", cfg.workers);
        scalar!("rng_seed", cfg.rng_seed);
        if let Some((l, v)) = single("direction")? {
            cfg.direction = match v {
                "forward" => Direction::Forward,
                "backward" => Direction::Backward,
                other => return Err(syntax(l, format!("unknown direction '{other}'"))),
            };
        }
        if let Some((l, v)) = single("t_range")? {
            let x: Vec<f64> = parse_list(l, v)?;
            let [lo, hi] = x[..] else { return Err(syntax(l, "t_range needs two numbers")) };
            cfg.t_range = (lo, hi);
        }
        if let Some((_, v)) = single("output")? {
            cfg.output = (v != "none").then(|| v.to_string());
        }
        Ok(cfg)
    }
}

fn term_text(t: &Term) -> String {
    let mut parts = vec![t.coeff.re.to_string(), t.coeff.im.to_string()];
    parts.extend(t.exps.iter().map(u32::to_string));
    parts.join(" ")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn opt_text<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".into(), |v| v.to_string())
}

fn parse_num<T: std::str::FromStr>(line: usize, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| syntax(line, format!("cannot parse '{v}'")))
}

fn parse_list<T: std::str::FromStr>(line: usize, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split_whitespace().map(|x| parse_num(line, x)).collect()
}

fn parse_term(line: usize, v: &str, n: usize) -> Result<Term, ConfigError> {
    let x: Vec<&str> = v.split_whitespace().collect();
    if x.len() != 2 + n {
        return Err(syntax(line, format!("term needs 2 + {n} fields, got {}", x.len())));
    }
    let coeff = C64::new(parse_num(line, x[0])?, parse_num(line, x[1])?);
    let exps = x[2..].iter().map(|e| parse_num(line, e)).collect::<Result<_, _>>()?;
    Ok(Term::new(coeff, exps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, Just(0.0), Just(1e-300), Just(-0.1), Just(1.0 / 3.0)]
    }

    fn positive() -> impl Strategy<Value = f64> {
        prop_oneof![1e-14..10.0f64, Just(1e-10), Just(0.1)]
    }

    fn term(n: usize) -> impl Strategy<Value = Term> {
        (finite(), finite(), prop::collection::vec(0u32..6, n)).prop_map(|(re, im, e)| Term::new(C64::new(re, im), e))
    }

    fn model() -> impl Strategy<Value = ModelSpec> {
        (2usize..5).prop_flat_map(|n| {
            prop_oneof![
                prop::collection::vec(prop::collection::vec(term(n), 0..4), n)
                    .prop_map(move |components| ModelSpec::VectorField { n, components }),
                prop::collection::vec(term(n), 0..5).prop_map(move |terms| ModelSpec::FirstIntegral { n, terms }),
                prop::collection::vec(prop::collection::vec((finite(), finite()), n), 1..3).prop_map(|rows| {
                    ModelSpec::LinearAction {
                        rows: rows.into_iter().map(|r| r.into_iter().map(|(a, b)| C64::new(a, b)).collect()).collect(),
                    }
                }),
            ]
        })
    }

    fn morse(n: usize) -> impl Strategy<Value = MorseKind> {
        prop_oneof![
            Just(MorseKind::Round),
            (prop::collection::vec(positive(), n), prop::collection::vec(positive(), n))
                .prop_map(|(a, b)| MorseKind::Weighted { a, b }),
            prop::collection::vec(
                (finite(), finite(), prop::collection::vec(0u32..3, n), prop::collection::vec(0u32..3, n)),
                0..4
            )
            .prop_map(|ts| MorseKind::General {
                terms: ts
                    .into_iter()
                    .map(|(re, im, z, w)| MixedTerm { coeff: C64::new(re, im), z_exps: z, zbar_exps: w })
                    .collect()
            }),
        ]
    }

    fn config() -> impl Strategy<Value = RunConfig> {
        model().prop_flat_map(|m| {
            let n = m.n();
            (
                Just(m),
                morse(n),
                prop::option::of(prop::collection::vec(term(n), 0..3)),
                prop::collection::vec(positive(), 1..4),
                prop::collection::vec((finite(), finite()), 0..3),
                (positive(), positive(), 1usize..5000, prop::option::of(positive()), positive()),
                (prop::option::of(positive()), prop::option::of(positive()), 1usize..10_000_000, positive()),
                (0usize..5, any::<bool>(), positive(), 3usize..100),
                (prop::option::of("[a-z0-9_./]{1,12}"), prop::option::of(1usize..64), any::<u64>(), 0usize..5),
            )
                .prop_map(|(model, morse, level, eps, levels, s, f, misc, out)| {
                    let mut cfg = RunConfig::new(CommandKind::ALL[out.3], model, morse);
                    cfg.level = level;
                    cfg.eps = eps;
                    cfg.levels = levels.into_iter().map(|(a, b)| C64::new(a, b)).collect();
                    (cfg.ball_radius, cfg.tol, cfg.seeds, cfg.dedup, cfg.rank_tol) = s;
                    (cfg.origin_radius, cfg.exit_radius, cfg.budget, cfg.drift_tol) = f;
                    cfg.orbits = misc.0;
                    cfg.direction = if misc.1 { Direction::Forward } else { Direction::Backward };
                    cfg.t_range = (misc.2, misc.2 + 1.0);
                    cfg.grid = misc.3;
                    cfg.output = out.0.filter(|o| o != "none");
                    cfg.workers = out.1;
                    cfg.rng_seed = out.2;
                    cfg
                })
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(cfg in config()) {
            let text = cfg.to_text();
            let back = RunConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn defaults_validate() {
        let model = ModelSpec::FirstIntegral {
            n: 2,
            terms: vec![Term::new(C64::new(1., 0.), vec![3, 0]), Term::new(C64::new(1., 0.), vec![0, 3])],
        };
        let cfg = RunConfig::new(CommandKind::Analyze, model, MorseKind::Round);
        cfg.validate().unwrap();
        cfg.model.build().unwrap();
        let mut bad = cfg.clone();
        bad.tol = 0.0;
        assert!(bad.validate().is_err());
        let mut far = cfg.clone();
        far.eps = vec![2.0];
        assert!(far.validate().is_err());
        let mut scan = cfg;
        scan.command = CommandKind::SphereScan;
        scan.eps = vec![0.5, 1.0];
        assert!(scan.validate().is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = RunConfig::parse("command=analyze\nn=2\nmodel=first_integral\nterm=1 0 3\nmorse=round\n").unwrap_err();
        assert_eq!(err, ConfigError::Syntax { line: 4, message: "term needs 2 + 2 fields, got 3".into() });
        let err = RunConfig::parse("command=analyze\nbogus\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
        let err = RunConfig::parse("command=analyze\nn=2\nmodel=first_integral\nmorse=round\nfoo=1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 5, .. }));
    }

    #[test]
    fn model_spec_round_trips_through_the_model() {
        let model = foliage::models::pham(3, 4).unwrap().model;
        let spec = ModelSpec::from_model(&model);
        assert_eq!(spec.build().unwrap(), model);
    }
}
