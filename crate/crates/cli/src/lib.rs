//! The `parisian` command-line tool: ruin-probability formulas, Monte Carlo
//! estimators, Piterbarg-constant estimation and theory-vs-simulation
//! studies, each emitting one JSON record per run.

pub mod config;
pub mod record;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand};
use parisian_core::mc::{self, RuinMode};
use parisian_core::{model, piterbarg, GridSpec, McConfig, ModelParams, PiterbargConfig};

use config::{parse_list, required, FileConfig};
use record::{
    EstimateReport, FormulasReport, RuinTimeReport, RunConfig, RunRecord, RunResult, TailPoint,
};

pub const DEFAULT_PATHS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BASE_STEP: f64 = 1e-3;
pub const DEFAULT_FINE_STEP: f64 = 1e-4;
pub const DEFAULT_PITERBARG_PATHS: u64 = 200_000;
const DEFAULT_LAMBDAS: &str = "2,5,10";
const DEFAULT_XS: &str = "0,0.5,1,2,4";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or missing arguments.
    #[error("{0}")]
    Usage(String),
    /// Arguments parse but violate a model or grid invariant.
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<parisian_core::Error> for CliError {
    fn from(e: parisian_core::Error) -> Self {
        match e {
            parisian_core::Error::Internal(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "parisian",
    version,
    about = "Ruin probabilities for the Brownian risk model with interest"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the exact and asymptotic formulas.
    Formulas {
        #[command(flatten)]
        model: ModelFlags,
        /// Piterbarg constant for the Parisian asymptotic (defaults to 2 when T = 0).
        #[arg(long, allow_negative_numbers = true)]
        piterbarg_value: Option<f64>,
        /// Points x of the limiting ruin-time tail.
        #[arg(long)]
        xs: Option<String>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Monte Carlo ruin probability.
    Estimate {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        mc: McFlags,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<RuinMode>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Generalized Piterbarg constant along a lambda schedule.
    Piterbarg {
        /// Infimum window length T.
        #[arg(long = "T", allow_negative_numbers = true)]
        t_window: Option<f64>,
        /// Increasing schedule, e.g. `2,5,10`.
        #[arg(long)]
        lambdas: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        step: Option<f64>,
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Monte Carlo against the large-reserve asymptotic over a u schedule.
    Study {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        mc: McFlags,
        /// Increasing reserve levels, e.g. `0.5,1,1.5,2`.
        #[arg(long)]
        us: Option<String>,
        /// Piterbarg constant (defaults to 2 when T = 0).
        #[arg(long, allow_negative_numbers = true)]
        piterbarg_value: Option<f64>,
        /// Write the `u,mc,se,asymptotic,ratio` table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Empirical conditional law of the scaled ruin time.
    RuinTime {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        mc: McFlags,
        #[arg(long)]
        xs: Option<String>,
        /// Write the `x,empirical_tail,theory_tail` table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// Initial reserve.
    #[arg(long, allow_negative_numbers = true)]
    pub u: Option<f64>,
    /// Premium rate.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Force of interest.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Horizon.
    #[arg(long = "S", allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// Window constant: T_u = T / u² (default 0).
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t_scaled: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct McFlags {
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub base_step: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub fine_step: Option<f64>,
    /// Width of the fine region before S (default min(S, max(10/u², 0.05 S))).
    #[arg(long, allow_negative_numbers = true)]
    pub fine_window: Option<f64>,
    /// Use nodes equally spaced in claim variance with this spacing on [0, S].
    #[arg(long, allow_negative_numbers = true)]
    pub clock_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// TOML file with default values for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Append the JSON record to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<RuinMode, String> {
    match s {
        "classical" => Ok(RuinMode::Classical),
        "parisian" => Ok(RuinMode::Parisian),
        _ => Err(format!("expected `classical` or `parisian`, got `{s}`")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Formulas { .. } => "formulas",
            Command::Estimate { .. } => "estimate",
            Command::Piterbarg { .. } => "piterbarg",
            Command::Study { .. } => "study",
            Command::RuinTime { .. } => "ruin-time",
        }
    }

    fn run_flags(&self) -> &RunFlags {
        match self {
            Command::Formulas { run, .. }
            | Command::Estimate { run, .. }
            | Command::Piterbarg { run, .. }
            | Command::Study { run, .. }
            | Command::RuinTime { run, .. } => run,
        }
    }
}

fn resolve_params(m: &ModelFlags, f: &FileConfig, need_u: bool) -> Result<ModelParams, CliError> {
    let u = if need_u {
        required(m.u, f.u, "u")?
    } else {
        m.u.or(f.u).unwrap_or(0.0)
    };
    let p = ModelParams {
        u,
        c: required(m.c, f.c, "c")?,
        sigma: required(m.sigma, f.sigma, "sigma")?,
        delta: required(m.delta, f.delta, "delta")?,
        horizon: required(m.horizon, f.horizon, "S")?,
        t_scaled: m.t_scaled.or(f.t_scaled).unwrap_or(0.0),
    };
    p.validate()?;
    Ok(p)
}

fn resolve_grid(g: &McFlags, f: &FileConfig) -> GridSpec {
    let base_step = g.base_step.or(f.base_step).unwrap_or(DEFAULT_BASE_STEP);
    let fine_step = g
        .fine_step
        .or(f.fine_step)
        .unwrap_or(DEFAULT_FINE_STEP.min(base_step));
    if let Some(clock_step) = g.clock_step.or(f.clock_step) {
        GridSpec::VarianceClock {
            clock_step,
            fine_step,
        }
    } else if let Some(fine_window) = g.fine_window.or(f.fine_window) {
        GridSpec::Fixed {
            base_step,
            fine_step,
            fine_window,
        }
    } else {
        GridSpec::Adaptive {
            base_step,
            fine_step,
        }
    }
}

fn resolve_mc(params: ModelParams, g: &McFlags, f: &FileConfig) -> Result<McConfig, CliError> {
    let cfg = McConfig::new(
        params,
        resolve_grid(g, f),
        g.paths.or(f.paths).unwrap_or(DEFAULT_PATHS),
        g.seed.or(f.seed).unwrap_or(DEFAULT_SEED),
    );
    // Validate grid and path count before any simulation starts.
    cfg.grid()?;
    Ok(cfg)
}

fn resolve_list(
    flag: &Option<String>,
    file: &Option<Vec<f64>>,
    name: &str,
    default: Option<&str>,
) -> Result<Vec<f64>, CliError> {
    match (flag, file, default) {
        (Some(text), _, _) => parse_list(text, name),
        (None, Some(v), _) => Ok(v.clone()),
        (None, None, Some(text)) => parse_list(text, name),
        (None, None, None) => required(None, None, name),
    }
}

fn piterbarg_value_or_default(given: Option<f64>, p: &ModelParams) -> Option<f64> {
    given.or((p.t_scaled == 0.0).then_some(2.0))
}

/// The outcome of one command: its record plus an optional CSV table.
pub struct Output {
    pub record: RunRecord,
    pub csv: Option<(PathBuf, String)>,
}

/// Runs a parsed command, honouring `--threads`, and writes the record to
/// `--out` and the CSV table if requested.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let flags = cli.command.run_flags();
    let file = match &flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let threads = flags.threads.or(file.threads);
    let output = match threads {
        Some(0) => return Err(CliError::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?
            .install(|| execute(&cli.command, &file))?,
        None => execute(&cli.command, &file)?,
    };
    if let Some(path) = &flags.out {
        append_line(path, &output.record.to_json_line())?;
    }
    if let Some((path, table)) = &output.csv {
        std::fs::write(path, table)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(output)
}

fn append_line(path: &Path, line: &str) -> Result<(), CliError> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    writeln!(file, "{line}")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn execute(command: &Command, file: &FileConfig) -> Result<Output, CliError> {
    let started = Instant::now();
    let mut csv = None;
    let (seed, params, config, result) = match command {
        Command::Formulas {
            model,
            piterbarg_value,
            xs,
            ..
        } => {
            let p = resolve_params(model, file, true)?;
            let xs = resolve_list(xs, &file.xs, "xs", Some(DEFAULT_XS))?;
            let pv = piterbarg_value_or_default(piterbarg_value.or(file.piterbarg_value), &p);
            let report = formulas(&p, pv, &xs)?;
            (
                None,
                Some(p),
                RunConfig::Formulas {
                    piterbarg_value: pv,
                    xs,
                },
                RunResult::Formulas(report),
            )
        }
        Command::Estimate {
            model, mc: g, mode, ..
        } => {
            let p = resolve_params(model, file, true)?;
            let cfg = resolve_mc(p, g, file)?;
            let mode = mode.or(file.mode).unwrap_or(RuinMode::Parisian);
            let grid_nodes = cfg.grid()?.len();
            let estimate = mc::estimate_ruin_prob(&cfg, mode)?;
            let exact = match mode {
                RuinMode::Classical => mc::exact_ruin_prob(&p.with_t_scaled(0.0)),
                RuinMode::Parisian => mc::exact_ruin_prob(&p),
            };
            (
                Some(cfg.seed),
                Some(p),
                RunConfig::Estimate { mc: cfg, mode },
                RunResult::Estimate(EstimateReport {
                    estimate,
                    grid_nodes,
                    exact,
                }),
            )
        }
        Command::Piterbarg {
            t_window,
            lambdas,
            step,
            paths,
            seed,
            ..
        } => {
            let t = t_window.or(file.t_scaled).unwrap_or(0.0);
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::Config(format!(
                    "T must be finite and >= 0, got {t}"
                )));
            }
            let lambdas = resolve_list(lambdas, &file.lambdas, "lambdas", Some(DEFAULT_LAMBDAS))?;
            let base = PiterbargConfig {
                lambda: lambdas.last().copied().unwrap_or(f64::NAN),
                t_window: t,
                step: step.or(file.step).unwrap_or(piterbarg::DEFAULT_STEP),
                paths: paths.or(file.paths).unwrap_or(DEFAULT_PITERBARG_PATHS),
                seed: seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            };
            let result = piterbarg::extrapolate_piterbarg(t, &lambdas, &base)?;
            (
                Some(base.seed),
                None,
                RunConfig::Piterbarg { base, lambdas },
                RunResult::Piterbarg(result),
            )
        }
        Command::Study {
            model,
            mc: g,
            us,
            piterbarg_value,
            csv: csv_path,
            ..
        } => {
            let p = resolve_params(model, file, false)?;
            let us = resolve_list(us, &file.us, "us", None)?;
            if us.is_empty() {
                return Err(CliError::Usage("--us: u schedule is empty".into()));
            }
            if let Some(bad) = us.iter().find(|u| !(u.is_finite() && **u > 0.0)) {
                return Err(CliError::Config(format!(
                    "--us: reserve levels must be > 0, got {bad}"
                )));
            }
            let pv = piterbarg_value_or_default(piterbarg_value.or(file.piterbarg_value), &p)
                .ok_or_else(|| {
                    CliError::Usage("--piterbarg-value is required when T > 0".into())
                })?;
            // Validate the grid at every level before simulating any of them.
            let cfg = resolve_mc(p.with_u(us[0]), g, file)?;
            for &u in &us {
                cfg.with_params(p.with_u(u)).grid()?;
            }
            let rows = mc::convergence_study(&cfg, &us, pv)?;
            if let Some(path) = csv_path {
                csv = Some((path.clone(), record::study_csv(&rows)));
            }
            (
                Some(cfg.seed),
                Some(p),
                RunConfig::Study {
                    mc: cfg,
                    us,
                    piterbarg_value: pv,
                },
                RunResult::Study { rows },
            )
        }
        Command::RuinTime {
            model,
            mc: g,
            xs,
            csv: csv_path,
            ..
        } => {
            let p = resolve_params(model, file, true)?;
            let cfg = resolve_mc(p, g, file)?;
            let xs = resolve_list(xs, &file.xs, "xs", Some(DEFAULT_XS))?;
            let tail = mc::estimate_ruin_time_tail(&cfg, &xs)?;
            if let Some(path) = csv_path {
                csv = Some((path.clone(), record::tail_csv(&tail)));
            }
            let sup_distance = tail.sup_distance();
            (
                Some(cfg.seed),
                Some(p),
                RunConfig::RuinTime { mc: cfg, xs },
                RunResult::RuinTime(RuinTimeReport { tail, sup_distance }),
            )
        }
    };
    let record = RunRecord {
        command: command.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        params,
        config,
        result,
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok(Output { record, csv })
}

fn formulas(
    p: &ModelParams,
    piterbarg_value: Option<f64>,
    xs: &[f64],
) -> Result<FormulasReport, CliError> {
    let ap = p.asymptotic();
    let parisian_asymptotic = match piterbarg_value {
        Some(v) if p.u > 0.0 => Some(model::parisian_asymptotic(p, v)?),
        Some(v) if !(v.is_finite() && v > 0.0) => {
            return Err(CliError::Config(format!(
                "piterbarg value must be finite and > 0, got {v}"
            )))
        }
        _ => None,
    };
    let ruin_time_tail = xs
        .iter()
        .map(|&x| {
            Ok(TailPoint {
                x,
                value: model::ruin_time_tail_asymptotic(p, x)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(FormulasReport {
        psi_inf: model::psi_inf(p)?,
        psi_s_exact: (p.delta == 0.0)
            .then(|| model::psi_s_zero_exact(p))
            .transpose()?,
        a: ap.a,
        b: ap.b,
        rate: ap.rate(p),
        piterbarg_argument: model::piterbarg_argument(p),
        piterbarg_value,
        parisian_asymptotic,
        ruin_time_tail,
    })
}

/// Parses `args`, runs the command, prints the record to `stdout` and
/// diagnostics to `stderr`; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match run(&cli) {
        Ok(output) => match writeln!(stdout, "{}", output.record.to_json_line()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot write record: {e}");
                1
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if matches!(e, CliError::Usage(_)) {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(cli.command.name()) {
                    let _ = writeln!(stderr, "\n{}", sub.render_usage());
                }
            }
            e.exit_code()
        }
    }
}
