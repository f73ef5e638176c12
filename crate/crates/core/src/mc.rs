//! Monte Carlo estimators of ruin probabilities and ruin-time laws.
//!
//! Path `i` of a run always uses `StreamKey::new(seed, i)`, so results depend
//! only on the configuration, never on how rayon schedules the work. Counts
//! are integers and sample sums run in index order, which keeps estimates
//! bitwise reproducible for any thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::gaussian::StreamKey;
use crate::model::{self, ModelParams};
use crate::pathsim::{GridSpec, PathKernel, RuinOutcome, TimeGrid};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinMode {
    Classical,
    Parisian,
}

impl std::fmt::Display for RuinMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RuinMode::Classical => f.write_str("classical"),
            RuinMode::Parisian => f.write_str("parisian"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub paths: u64,
    pub seed: u64,
}

impl McConfig {
    pub fn new(params: ModelParams, grid: GridSpec, paths: u64, seed: u64) -> Self {
        Self {
            params,
            grid,
            paths,
            seed,
        }
    }

    pub fn with_params(self, params: ModelParams) -> Self {
        Self { params, ..self }
    }

    /// Validates the configuration and builds its grid.
    pub fn grid(&self) -> Result<TimeGrid> {
        self.params.validate()?;
        if self.paths == 0 {
            return config("paths must be >= 1");
        }
        self.grid.build(&self.params)
    }
}

/// A Monte Carlo point estimate with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub n: u64,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Estimate {
    /// Binomial proportion with its plug-in standard error and a Wilson
    /// score interval.
    pub fn proportion(successes: u64, n: u64) -> Result<Self> {
        let ci95 = wilson_ci(successes, n)?;
        let value = successes as f64 / n as f64;
        let stderr = (value * (1.0 - value) / n as f64).sqrt();
        Ok(Self {
            value,
            stderr,
            ci95,
            n,
            meta: BTreeMap::new(),
        })
    }

    /// Sample mean, standard error and a normal 95% interval.
    pub fn mean_of(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return config("cannot average an empty sample");
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            value: mean,
            stderr,
            ci95: (mean - Z95 * stderr, mean + Z95 * stderr),
            n: n as u64,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_ci(successes: u64, n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return config("wilson_ci needs n >= 1");
    }
    if successes > n {
        return config(format!("successes {successes} exceed n {n}"));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0).min(p)
    };
    let hi = if successes == n {
        1.0
    } else {
        (centre + half).min(1.0).max(p)
    };
    Ok((lo, hi))
}

fn describe_grid(grid: &TimeGrid) -> String {
    format!("{:?}, {} nodes", grid.policy(), grid.len())
}

/// Ruin outcome of every path, in path order.
pub fn simulate_outcomes(cfg: &McConfig) -> Result<Vec<RuinOutcome>> {
    let grid = cfg.grid()?;
    let kernel = PathKernel::new(cfg.params, grid);
    let seed = cfg.seed;
    Ok((0..cfg.paths)
        .into_par_iter()
        .map(|i| kernel.run(StreamKey::new(seed, i)))
        .collect())
}

fn count_ruined(kernel: &PathKernel, seed: u64, paths: u64, mode: RuinMode) -> u64 {
    (0..paths)
        .into_par_iter()
        .filter(|&i| {
            let out = kernel.run(StreamKey::new(seed, i));
            match mode {
                RuinMode::Classical => out.classical_ruined,
                RuinMode::Parisian => out.parisian_ruined,
            }
        })
        .count() as u64
}

/// Fraction of simulated paths that are ruined in the requested sense.
pub fn estimate_ruin_prob(cfg: &McConfig, mode: RuinMode) -> Result<Estimate> {
    let grid = cfg.grid()?;
    let description = describe_grid(&grid);
    // Classical ruin ignores the window; scanning with T = 0 on the same
    // grid lets paths stop at the first exceedance.
    let params = match mode {
        RuinMode::Classical => cfg.params.with_t_scaled(0.0),
        RuinMode::Parisian => cfg.params,
    };
    let kernel = PathKernel::new(params, grid);
    let ruined = count_ruined(&kernel, cfg.seed, cfg.paths, mode);
    Ok(Estimate::proportion(ruined, cfg.paths)?
        .with_meta("seed", cfg.seed)
        .with_meta("mode", mode)
        .with_meta("grid", description)
        .with_meta("ruined", ruined))
}

/// One row of an empirical conditional ruin-time tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub x: f64,
    pub tail: Estimate,
    /// Limiting value `e^{-rate·x}`.
    pub theory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuinTimeTail {
    pub paths: u64,
    pub ruined: u64,
    pub rows: Vec<TailRow>,
    pub diagnostic: Option<String>,
}

impl RuinTimeTail {
    /// `max_x |empirical - theory|` over the rows.
    pub fn sup_distance(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| (r.tail.value - r.theory).abs())
            .reduce(f64::max)
    }
}

/// Empirical `P(u²(S + T_u - η) ≥ x | η ≤ S + T_u)` for each `x`, rows sorted
/// by `x`. For `T = 0`, `η` is the classical ruin time.
pub fn estimate_ruin_time_tail(cfg: &McConfig, xs: &[f64]) -> Result<RuinTimeTail> {
    if let Some(bad) = xs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return config(format!("tail abscissae must be finite and >= 0, got {bad}"));
    }
    let p = cfg.params;
    let end = p.horizon + p.window();
    let scale = p.u * p.u;
    let mut scaled: Vec<f64> = simulate_outcomes(cfg)?
        .iter()
        .filter_map(|o| o.eta)
        .map(|eta| (scale * (end - eta)).max(0.0))
        .collect();
    let ruined = scaled.len() as u64;
    if ruined == 0 {
        return Ok(RuinTimeTail {
            paths: cfg.paths,
            ruined,
            rows: Vec::new(),
            diagnostic: Some("no ruined paths; conditional tail undefined".to_string()),
        });
    }
    scaled.sort_by(f64::total_cmp);

    let mut sorted_xs = xs.to_vec();
    sorted_xs.sort_by(f64::total_cmp);
    let rows = sorted_xs
        .into_iter()
        .map(|x| {
            let below = scaled.partition_point(|&y| y < x) as u64;
            let tail = Estimate::proportion(ruined - below, ruined)?;
            Ok(TailRow {
                x,
                tail,
                theory: model::ruin_time_tail_asymptotic(&p, x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let diagnostic = (ruined < 100).then(|| format!("only {ruined} ruined paths"));
    Ok(RuinTimeTail {
        paths: cfg.paths,
        ruined,
        rows,
        diagnostic,
    })
}

/// Monte Carlo against the large-reserve asymptotic at one reserve level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub u: f64,
    pub mc: Estimate,
    pub asymptotic: f64,
    /// Closed-form value where one exists (`δ = 0`, `T = 0`).
    pub exact: Option<f64>,
    /// `mc / asymptotic`; absent when the estimate is 0.
    pub ratio: Option<f64>,
    /// Delta-method standard error of the ratio.
    pub ratio_se: Option<f64>,
}

/// Exact Parisian ruin probability when a closed form is known.
pub fn exact_ruin_prob(p: &ModelParams) -> Option<f64> {
    (p.delta == 0.0 && p.t_scaled == 0.0)
        .then(|| model::psi_s_zero_exact(p).ok())
        .flatten()
}

/// Runs the Parisian estimator for each reserve level in `u_schedule`,
/// with the base seed reused across levels.
pub fn convergence_study(
    base: &McConfig,
    u_schedule: &[f64],
    piterbarg_value: f64,
) -> Result<Vec<StudyRow>> {
    if u_schedule.is_empty() {
        return config("u schedule is empty");
    }
    if !u_schedule.windows(2).all(|w| w[1] > w[0]) {
        return config("u schedule must be strictly increasing");
    }
    u_schedule
        .iter()
        .map(|&u| {
            let cfg = base.with_params(base.params.with_u(u));
            let mc = estimate_ruin_prob(&cfg, RuinMode::Parisian)?;
            let asymptotic = model::parisian_asymptotic(&cfg.params, piterbarg_value)?;
            let (ratio, ratio_se) = if mc.value > 0.0 && asymptotic > 0.0 {
                (Some(mc.value / asymptotic), Some(mc.stderr / asymptotic))
            } else {
                (None, None)
            };
            Ok(StudyRow {
                u,
                exact: exact_ruin_prob(&cfg.params),
                mc,
                asymptotic,
                ratio,
                ratio_se,
            })
        })
        .collect()
}
