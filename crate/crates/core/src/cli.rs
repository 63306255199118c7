//! The `offload` command-line front end.
//!
//! Parameters come from a JSON file (`--config`) or default to the vehicular
//! set. Results go to `--out` or stdout: JSON for single results, CSV for
//! sweeps and comparisons. Failures print `{"error": kind, "message": ...}`
//! on stderr and exit nonzero.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytic::{analyze, max_mean_delay};
use crate::ctmc::{boundary_solution, numeric_mean_delay, truncated_chain_adaptive, TruncationPolicy};
use crate::error::{Error, Result};
use crate::optimize::{
    compare_over_preferences, default_grid, lin_space, log_space, optimal_deadline, sweep, write_comparison_csv,
    write_sweep_csv, SearchMode,
};
use crate::params::{Deadline, ParamsFile, Preference, SystemParams};
use crate::sim::{self, DeadlineKind, Horizon, HotspotModel, SimConfig, Strategy};

#[derive(Debug, Parser)]
#[command(
    name = "offload",
    version,
    about = "Deadline-based Wi-Fi offloading: analysis, simulation and deadline optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form delay, efficiency and maximal delay at one deadline (JSON).
    Analyze,
    /// Simulate one strategy (JSON).
    Simulate,
    /// Analytic utility over a deadline grid (CSV).
    Sweep,
    /// Optimal deadline for a preference weight (JSON).
    Optimize,
    /// Simulated utility of the three strategies over preference weights (CSV).
    Compare,
    /// Cross-check of all delay computations at one deadline (JSON).
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Deadline,
    OnTheSpot,
    Pure,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Deadline => Strategy::Deadline,
            StrategyArg::OnTheSpot => Strategy::OnTheSpot,
            StrategyArg::Pure => Strategy::Pure,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Parameter file: {"lambda_fps", "mu1_fps", "mu2_fps", "mean_c_s", "mean_f_s", "tau_s"}.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Preference weight on delay, in [0, 1].
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Mean deadline in seconds, or `inf`. Overrides the parameter file.
    #[arg(long, global = true)]
    pub tau: Option<Deadline>,
    /// Grid spec `lin:<start>:<end>:<count>` or `log:<start>:<end>:<count>`:
    /// deadlines for `sweep`, preference weights for `compare`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 20)]
    pub replications: usize,
    /// Frames per replication after the warmup.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub frames: u64,
    #[arg(long, global = true, default_value = "scan")]
    pub mode: SearchMode,
    /// Deadline step of the stepping search (s).
    #[arg(long, global = true, default_value_t = 1.0)]
    pub delta_tau: f64,
    /// Largest deadline searched (s).
    #[arg(long, global = true, default_value_t = crate::optimize::DEFAULT_TAU_CAP)]
    pub tau_cap: f64,
    /// `exp` (model) or `det` (fixed timer).
    #[arg(long, global = true, default_value = "exp", value_parser = parse_deadline_kind)]
    pub deadline_kind: DeadlineKind,
    /// `fixed` or `uniform:<lo>:<hi>` Wi-Fi rate per hotspot (frames/s).
    #[arg(long, global = true, default_value = "fixed", value_parser = parse_hotspot)]
    pub hotspot: HotspotModel,
    #[arg(long, global = true, value_enum, default_value_t = StrategyArg::Deadline)]
    pub strategy: StrategyArg,
    /// Full simulation config as JSON; replaces the simulation flags.
    #[arg(long, global = true)]
    pub sim_config: Option<PathBuf>,
    /// Per-frame CSV trace of a single simulated replication.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
}

pub fn parse_deadline_kind(s: &str) -> Result<DeadlineKind> {
    match s {
        "exp" => Ok(DeadlineKind::Exponential),
        "det" => Ok(DeadlineKind::Deterministic),
        other => Err(Error::Config(format!(
            "deadline kind must be exp or det, got `{other}`"
        ))),
    }
}

pub fn parse_hotspot(s: &str) -> Result<HotspotModel> {
    if s == "fixed" {
        return Ok(HotspotModel::Fixed);
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["uniform", lo, hi] => {
            let num = |t: &str| {
                t.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad hotspot rate `{t}`: {e}")))
            };
            Ok(HotspotModel::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            })
        }
        _ => Err(Error::Config(format!(
            "hotspot model must be fixed or uniform:<lo>:<hi>, got `{s}`"
        ))),
    }
}

/// Expands `lin:<start>:<end>:<count>` or `log:<start>:<end>:<count>`, both
/// inclusive of the endpoints.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let err = |token: &str, reason: &str| Error::GridParse {
        token: token.to_string(),
        reason: reason.to_string(),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [kind, start, end, count] = parts.as_slice() else {
        return Err(err(spec, "expected <lin|log>:<start>:<end>:<count>"));
    };
    let num = |t: &str| -> Result<f64> {
        match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(err(t, "not a finite number")),
        }
    };
    let (lo, hi) = (num(start)?, num(end)?);
    let n: usize = count.parse().map_err(|_| err(count, "count must be an integer"))?;
    if n < 2 {
        return Err(err(count, "count must be at least 2"));
    }
    match *kind {
        "lin" => Ok(lin_space(lo, hi, n)),
        "log" => {
            if lo <= 0.0 {
                return Err(err(start, "log start must be > 0"));
            }
            if hi <= 0.0 {
                return Err(err(end, "log end must be > 0"));
            }
            Ok(log_space(lo, hi, n))
        }
        other => Err(err(other, "grid kind must be lin or log")),
    }
}

/// Default deadline when neither the file nor `--tau` gives one.
pub const DEFAULT_TAU: f64 = 10.0;

pub fn load_params(opts: &Options) -> Result<SystemParams> {
    let base = match &opts.config {
        Some(path) => {
            let file: ParamsFile = serde_json::from_reader(io::BufReader::new(File::open(path)?))?;
            file.to_params(Some(Deadline::Finite(DEFAULT_TAU)))?
        }
        None => SystemParams::vehicular(Deadline::Finite(DEFAULT_TAU)),
    };
    let params = match opts.tau {
        Some(tau) => base.with_deadline(tau),
        None => base,
    };
    params.check_rates()?;
    Ok(params)
}

fn sim_config(opts: &Options, params: &SystemParams) -> Result<SimConfig> {
    let cfg = match &opts.sim_config {
        Some(path) => serde_json::from_reader(io::BufReader::new(File::open(path)?))?,
        None => SimConfig {
            params: *params,
            strategy: opts.strategy.into(),
            deadline_kind: opts.deadline_kind,
            horizon: Horizon::Frames(opts.frames),
            warmup_fraction: 0.1,
            seed: opts.seed,
            replications: opts.replications,
            hotspot: opts.hotspot,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn preference(opts: &Options) -> Result<Preference> {
    let a = opts
        .a
        .ok_or_else(|| Error::Config("this command needs --a <weight>".into()))?;
    Preference::new(a)
}

fn output(opts: &Options) -> Result<Box<dyn Write>> {
    Ok(match &opts.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(opts: &Options, value: &T) -> Result<()> {
    let mut w = output(opts)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Delay of one computation path and whether it met its tolerance against the closed form.
#[derive(Debug, Clone, Serialize)]
pub struct PathCheck {
    pub path: &'static str,
    pub delay_s: f64,
    pub eta: Option<f64>,
    pub relative_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub params: ParamsFile,
    pub checks: Vec<PathCheck>,
    pub all_pass: bool,
}

/// Closed form vs generating function vs truncated chain vs simulation.
pub fn validate(params: &SystemParams, sim: &SimConfig) -> Result<ValidationReport> {
    let p = params.validate()?;
    let analysis = analyze(&p)?;
    let reference = analysis.delay();
    let gap = |d: f64| (d - reference).abs() / reference;
    let mut checks = vec![PathCheck {
        path: "closed_form",
        delay_s: reference,
        eta: Some(analysis.eta()),
        relative_gap: 0.0,
        tolerance: 0.0,
        pass: true,
        note: String::new(),
    }];

    let boundary = boundary_solution(&p)?;
    let gf = numeric_mean_delay(&p, &boundary)?;
    checks.push(PathCheck {
        path: "generating_function",
        delay_s: gf,
        eta: None,
        relative_gap: gap(gf),
        tolerance: 5e-3,
        pass: gap(gf) <= 5e-3,
        note: String::new(),
    });

    match truncated_chain_adaptive(&p, &TruncationPolicy::default()) {
        Ok(chain) => {
            let d = chain.mean_delay();
            checks.push(PathCheck {
                path: "truncated_chain",
                delay_s: d,
                eta: Some(chain.eta()),
                relative_gap: gap(d),
                tolerance: 5e-3,
                pass: gap(d) <= 5e-3,
                note: format!("{} levels, tail mass {:e}", chain.levels, chain.tail_mass),
            });
        }
        Err(e) => checks.push(PathCheck {
            path: "truncated_chain",
            delay_s: f64::NAN,
            eta: None,
            relative_gap: f64::NAN,
            tolerance: 5e-3,
            pass: false,
            note: e.to_string(),
        }),
    }

    let cfg = SimConfig {
        params: p,
        strategy: Strategy::Deadline,
        ..*sim
    };
    let r = sim::replicate(&cfg)?;
    let d = r.mean_delay.mean;
    let within_ci = r.mean_delay.contains(reference);
    checks.push(PathCheck {
        path: "simulation",
        delay_s: d,
        eta: Some(r.eta.mean),
        relative_gap: gap(d),
        tolerance: 3e-2,
        pass: gap(d) <= 3e-2 || within_ci,
        note: format!(
            "{} replications, 95% CI half-width {}",
            r.replications, r.mean_delay.half_width
        ),
    });

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport {
        params: ParamsFile::from(&p),
        checks,
        all_pass,
    })
}

/// Runs one command; `Ok(false)` means it ran but a validation check failed.
pub fn dispatch(cli: &Cli) -> Result<bool> {
    let opts = &cli.opts;
    let params = load_params(opts)?;
    match cli.command {
        Command::Analyze => emit_json(opts, &analyze(&params)?)?,
        Command::Simulate => {
            let cfg = sim_config(opts, &params)?;
            let mut result = match &opts.trace {
                Some(path) => {
                    let (result, trace) = sim::run_traced(&cfg)?;
                    let mut w = csv::Writer::from_path(path)?;
                    for rec in &trace {
                        w.serialize(rec)?;
                    }
                    w.flush()?;
                    result
                }
                None if cfg.replications == 1 => sim::run(&cfg)?,
                None => sim::replicate(&cfg)?,
            };
            if opts.a.is_some() {
                result = result.with_utility(preference(opts)?, max_mean_delay(&cfg.params)?);
            }
            emit_json(opts, &result)?;
        }
        Command::Sweep => {
            let grid = match &opts.grid {
                Some(spec) => parse_grid(spec)?,
                None => default_grid(opts.tau_cap),
            };
            let rows = sweep(&params, preference(opts)?, &grid)?;
            write_sweep_csv(output(opts)?, &rows)?;
        }
        Command::Optimize => {
            let best = optimal_deadline(&params, preference(opts)?, opts.delta_tau, opts.tau_cap, opts.mode)?;
            emit_json(opts, &best)?;
        }
        Command::Compare => {
            let weights = parse_grid(opts.grid.as_deref().unwrap_or("lin:0:1:11"))?;
            let cfg = sim_config(opts, &params)?;
            let rows = compare_over_preferences(&params, &weights, &cfg, opts.tau_cap)?;
            write_comparison_csv(output(opts)?, &rows)?;
        }
        Command::Validate => {
            let cfg = sim_config(opts, &params)?;
            let report = validate(&params, &cfg)?;
            emit_json(opts, &report)?;
            return Ok(report.all_pass);
        }
    }
    Ok(true)
}

/// Machine-readable error line for stderr.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Parses the arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_json("usage", &e.to_string()));
            return 2;
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            1
        }
    }
}

/// Logging verbosity from `OFFLOAD_LOG` (e.g. `warn`, `info`, `debug`).
pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("OFFLOAD_LOG", "warn")).try_init();
}
