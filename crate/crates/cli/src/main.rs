mod commands;
mod config;
mod shorthand;

use clap::{Args, Parser, Subcommand};
use commands::{CliError, Outcome};
use config::{CommandKind, RunConfig};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "foliage", version, about = "Contact sets of holomorphic foliations with Morse functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate, classify and cluster contacts on g-spheres; JSON-lines plus a summary.
    Analyze(Common),
    /// Integrate the leafwise gradient flow; JSON-lines orbit traces.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Starting point as comma-separated complex coordinates, e.g. `1+0.5i,0.2`.
        #[arg(long = "start")]
        starts: Vec<String>,
        /// Number of random starting points on the eps-sphere when no --start is given.
        #[arg(long)]
        orbits: Option<usize>,
        /// `backward` (alpha-limits) or `forward`.
        #[arg(long)]
        direction: Option<String>,
    },
    /// Component census on a decreasing list of g-spheres.
    SphereScan(Common),
    /// Signed contact counts on the fibres `f = t`.
    Euler {
        #[command(flatten)]
        common: Common,
        /// Fibre value, repeatable, e.g. `--level 0.3 --level 0.1+0.2i`.
        #[arg(long = "level", allow_hyphen_values = true)]
        levels: Vec<String>,
        /// Radius of the seed ball.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Minimum relative Hessian eigenvalue against |t|; CSV.
    BifurcationScan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run a scripted reproduction and check it against the expected census.
    Reproduce {
        /// One of pham_brieskorn, pham_bifurcation, rotation_degenerate,
        /// weighted_quadric, fermat, linear_poincare, linear_siegel,
        /// meersseman_action, twisted_cases.
        id: String,
        #[arg(long)]
        p: Option<u32>,
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        /// Extra parameter as key=value, repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Write the report as JSON to this path.
        #[arg(long)]
        json: Option<String>,
        /// Write the located contacts as JSON-lines to this path.
        #[arg(long)]
        contacts: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render saved reports, contact or orbit JSON-lines, or scan CSV as text.
    Report {
        #[arg(required = true)]
        files: Vec<String>,
    },
}

#[derive(Args, Default)]
struct Common {
    /// Run configuration file (key=value lines); flags override its entries.
    #[arg(long)]
    config: Option<String>,
    /// Model shorthand, e.g. `fermat:n=2,k=3`, `linear:1,1+1i`, `pham:p=3,q=4`.
    #[arg(long)]
    model: Option<String>,
    /// `round` or `weighted:a=2,1;b=2,1`.
    #[arg(long)]
    morse: Option<String>,
    /// Radius, or comma-separated radii for sphere-scan.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trust_radius: Option<f64>,
    #[arg(long)]
    dedup: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    origin_radius: Option<f64>,
    #[arg(long)]
    exit_radius: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    drift_tol: Option<f64>,
    /// Main output path; standard output when absent.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; the FOLIATION_WORKERS environment variable takes precedence.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for the low-discrepancy sequence shift.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the effective configuration to this path.
    #[arg(long)]
    save_config: Option<String>,
}

fn env_workers() -> Result<Option<usize>, CliError> {
    match std::env::var("FOLIATION_WORKERS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::validation(format!("FOLIATION_WORKERS='{v}' is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn build_config(kind: CommandKind, c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::validation(e.to_string()))?;
            cfg.command = kind;
            cfg
        }
        None => {
            let spec = c.model.as_deref().ok_or_else(|| CliError::validation("--model or --config is required"))?;
            let parsed = shorthand::parse_model(spec).map_err(CliError::validation)?;
            let mut cfg = RunConfig::new(kind, parsed.spec, foliage::calc::MorseKind::Round);
            cfg.level = parsed.level;
            cfg
        }
    };
    if let Some(m) = &c.model {
        if c.config.is_some() {
            let parsed = shorthand::parse_model(m).map_err(CliError::validation)?;
            cfg.model = parsed.spec;
            cfg.level = parsed.level;
        }
    }
    if let Some(m) = &c.morse {
        cfg.morse = shorthand::parse_morse(m).map_err(CliError::validation)?;
    }
    if let Some(e) = &c.eps {
        cfg.eps = e
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::validation(format!("cannot parse eps '{x}'"))))
            .collect::<Result<_, _>>()?;
    }
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
        (opt $flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = Some(v);
            }
        };
    }
    set!(c.seeds, cfg.seeds);
    set!(c.tol, cfg.tol);
    set!(c.trust_radius, cfg.trust_radius);
    set!(opt c.dedup, cfg.dedup);
    set!(c.rank_tol, cfg.rank_tol);
    set!(opt c.origin_radius, cfg.origin_radius);
    set!(opt c.exit_radius, cfg.exit_radius);
    set!(c.budget, cfg.budget);
    set!(c.drift_tol, cfg.drift_tol);
    set!(opt c.out.clone(), cfg.output);
    set!(opt c.workers, cfg.workers);
    set!(c.seed, cfg.rng_seed);
    if let Some(w) = env_workers()? {
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

fn finish_config(cfg: RunConfig, c: &Common) -> Result<RunConfig, CliError> {
    cfg.validate().map_err(|e| CliError::validation(e.to_string()))?;
    if let Some(path) = &c.save_config {
        std::fs::write(path, cfg.to_text()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Analyze(c) => commands::analyze(&finish_config(build_config(CommandKind::Analyze, &c)?, &c)?),
        Command::Flow { common, starts, orbits, direction } => {
            let mut cfg = build_config(CommandKind::Flow, &common)?;
            if let Some(o) = orbits {
                cfg.orbits = o;
            }
            if let Some(d) = direction {
                cfg.direction = match d.as_str() {
                    "forward" => foliage::flow::Direction::Forward,
                    "backward" => foliage::flow::Direction::Backward,
                    other => return Err(CliError::validation(format!("unknown direction '{other}'"))),
                };
            }
            let cfg = finish_config(cfg, &common)?;
            let starts = starts
                .iter()
                .map(|s| shorthand::parse_complex_list(s, ',').map_err(CliError::validation))
                .collect::<Result<Vec<_>, _>>()?;
            commands::flow(&cfg, &starts)
        }
        Command::SphereScan(c) => commands::sphere_scan(&finish_config(build_config(CommandKind::SphereScan, &c)?, &c)?),
        Command::Euler { common, levels, radius } => {
            let mut cfg = build_config(CommandKind::Euler, &common)?;
            if !levels.is_empty() {
                cfg.levels = levels
                    .iter()
                    .map(|l| shorthand::parse_complex(l).map_err(CliError::validation))
                    .collect::<Result<_, _>>()?;
            }
            if let Some(r) = radius {
                cfg.ball_radius = r;
            }
            commands::euler(&finish_config(cfg, &common)?)
        }
        Command::BifurcationScan { common, t_min, t_max, grid } => {
            let mut cfg = build_config(CommandKind::BifurcationScan, &common)?;
            if common.seeds.is_none() && common.config.is_none() {
                cfg.seeds = 300;
            }
            cfg.t_range = (t_min.unwrap_or(cfg.t_range.0), t_max.unwrap_or(cfg.t_range.1));
            if let Some(g) = grid {
                cfg.grid = g;
            }
            commands::bifurcation_scan(&finish_config(cfg, &common)?)
        }
        Command::Reproduce { id, p, q, n, k, t, params, json, contacts, workers, seed } => {
            let mut pairs: Vec<(String, String)> = Vec::new();
            for (key, v) in [("p", p.map(|v| v.to_string())), ("q", q.map(|v| v.to_string())), ("n", n.map(|v| v.to_string())), ("k", k.map(|v| v.to_string())), ("t", t.map(|v| v.to_string()))] {
                if let Some(v) = v {
                    pairs.push((key.to_string(), v));
                }
            }
            for p in &params {
                let (key, v) = p
                    .split_once('=')
                    .ok_or_else(|| CliError::validation(format!("--param expects key=value, got '{p}'")))?;
                pairs.push((key.to_string(), v.to_string()));
            }
            let workers = env_workers()?.or(workers);
            commands::reproduce(&id, pairs, json.as_deref(), contacts.as_deref(), workers, seed.unwrap_or(0))
        }
        Command::Report { files } => commands::report(&files),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::validation(e.kind().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("{note}");
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
