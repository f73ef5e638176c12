//! Monte Carlo estimation of the generalized Piterbarg constant
//!
//! ```text
//! 𝒫(λ, T) = E[ sup_{t∈[0,λ]} inf_{s∈[0,T]} exp(√2 B(t-s) - |t-s| - (t-s)) ],
//! 𝒫(T)    = lim_{λ→∞} 𝒫(λ, T),
//! ```
//!
//! with `B` a two-sided Brownian motion, `B(0) = 0`. Writing
//! `Z(v) = √2 B(v) - |v| - v`, the functional is
//! `exp(max_{t} min_{v∈[t-T, t]} Z(v))` over grid points, evaluated with a
//! sliding-window minimum and a running maximum. `𝒫(0) = 2`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::gaussian::StreamKey;
use crate::mc::Estimate;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Default grid spacing.
pub const DEFAULT_STEP: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiterbargConfig {
    pub lambda: f64,
    /// Length `T` of the infimum window.
    pub t_window: f64,
    pub step: f64,
    pub paths: u64,
    pub seed: u64,
}

impl PiterbargConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return config(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            ));
        }
        if !(self.t_window.is_finite() && self.t_window >= 0.0) {
            return config(format!("T must be finite and >= 0, got {}", self.t_window));
        }
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= 0.01) {
            return config(format!("step must lie in (0, 0.01], got {}", self.step));
        }
        if self.t_window > 0.0 && self.step > self.t_window / 8.0 {
            return config(format!(
                "step {} exceeds T/8 = {}",
                self.step,
                self.t_window / 8.0
            ));
        }
        if self.step > self.lambda {
            return config(format!("step {} exceeds lambda {}", self.step, self.lambda));
        }
        if self.paths == 0 {
            return config("paths must be >= 1");
        }
        Ok(())
    }

    fn lambda_nodes(&self) -> usize {
        grid_count(self.lambda, self.step)
    }

    fn window_nodes(&self) -> usize {
        grid_count(self.t_window, self.step)
    }
}

/// Number of whole steps in `len`, tolerant to rounding (`10 / 0.005 = 2000`).
fn grid_count(len: f64, step: f64) -> usize {
    (len / step * (1.0 + 1e-12)).floor() as usize
}

/// Field values `Z(k·step)` for `k = -origin ..= len - 1 - origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    /// Index of `v = 0`.
    pub origin: usize,
    pub step: f64,
}

impl Field {
    pub fn new(values: Vec<f64>, origin: usize, step: f64) -> Result<Self> {
        if origin >= values.len() {
            return config("field origin lies outside the values");
        }
        Ok(Self {
            values,
            origin,
            step,
        })
    }

    pub fn at(&self, k: isize) -> f64 {
        self.values[(self.origin as isize + k) as usize]
    }
}

fn fill_field(
    values: &mut Vec<f64>,
    window_nodes: usize,
    lambda_nodes: usize,
    step: f64,
    key: StreamKey,
) {
    values.clear();
    values.resize(window_nodes + lambda_nodes + 1, 0.0);
    let scale = SQRT_2 * step.sqrt();

    let mut left = key.lane(0).normals();
    let mut z = 0.0;
    for k in 1..=window_nodes {
        // v < 0: the drift -|v| - v vanishes.
        z += scale * left.next_normal();
        values[window_nodes - k] = z;
    }

    let mut right = key.lane(1).normals();
    let mut b = 0.0;
    for k in 1..=lambda_nodes {
        b += scale * right.next_normal();
        values[window_nodes + k] = b - 2.0 * step * k as f64;
    }
}

/// Samples `Z` on the grid of `[-T, λ]` (spacing `step`, node at 0).
/// The negative and positive half-lines use separate lanes of `key`, so a
/// longer `λ` extends the same field.
pub fn simulate_field(cfg: &PiterbargConfig, key: StreamKey) -> Result<Field> {
    cfg.validate()?;
    let mut values = Vec::new();
    let w = cfg.window_nodes();
    fill_field(&mut values, w, cfg.lambda_nodes(), cfg.step, key);
    Field::new(values, w, cfg.step)
}

/// `max_{0≤k≤n} min_{k-w≤j≤k} z[origin + j]` recorded at each checkpoint
/// `n` (ascending), in O(len) using a monotone deque of indices.
fn max_min_profile(z: &[f64], origin: usize, window: usize, checkpoints: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let last = match checkpoints.last() {
        Some(&n) => n,
        None => return out,
    };
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(window + 1);
    let push = |deque: &mut VecDeque<usize>, i: usize| {
        while deque.back().is_some_and(|&j| z[j] >= z[i]) {
            deque.pop_back();
        }
        deque.push_back(i);
    };
    for i in origin - window..origin {
        push(&mut deque, i);
    }
    let mut best = f64::NEG_INFINITY;
    let mut next = checkpoints.iter().peekable();
    for k in 0..=last {
        let i = origin + k;
        push(&mut deque, i);
        while deque.front().is_some_and(|&j| j + window < i) {
            deque.pop_front();
        }
        best = best.max(z[*deque.front().expect("deque holds the newest index")]);
        while next.peek().is_some_and(|&&n| n == k) {
            out.push(best);
            next.next();
        }
    }
    out
}

fn check_extent(field: &Field, lambda_nodes: usize, window_nodes: usize) -> Result<()> {
    if window_nodes > field.origin || field.origin + lambda_nodes >= field.values.len() {
        return Err(Error::Internal(format!(
            "window [-{window_nodes}, {lambda_nodes}] exceeds field [-{}, {}]",
            field.origin,
            field.values.len() - 1 - field.origin
        )));
    }
    Ok(())
}

/// `exp(max_{t∈[0,λ]} min_{v∈[t-T, t]} Z(v))` over grid points.
pub fn sup_inf_functional(field: &Field, lambda: f64, t_window: f64) -> Result<f64> {
    let n = grid_count(lambda, field.step);
    let w = grid_count(t_window, field.step);
    check_extent(field, n, w)?;
    Ok(max_min_profile(&field.values, field.origin, w, &[n])[0].exp())
}

/// Direct double loop over `t` and the window; reference for
/// [`sup_inf_functional`].
pub fn sup_inf_functional_bruteforce(field: &Field, lambda: f64, t_window: f64) -> Result<f64> {
    let n = grid_count(lambda, field.step) as isize;
    let w = grid_count(t_window, field.step) as isize;
    check_extent(field, n as usize, w as usize)?;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=n {
        let mut lowest = f64::INFINITY;
        for j in k - w..=k {
            lowest = lowest.min(field.at(j));
        }
        best = best.max(lowest);
    }
    Ok(best.exp())
}

/// Per-path functional values at several `λ` from one field per path.
fn sample_profiles(
    t_window: f64,
    step: f64,
    lambdas: &[f64],
    paths: u64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let window = grid_count(t_window, step);
    let checkpoints: Vec<usize> = lambdas.iter().map(|&l| grid_count(l, step)).collect();
    let top = *checkpoints.last().expect("at least one lambda");
    (0..paths)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            fill_field(buf, window, top, step, StreamKey::new(seed, i));
            max_min_profile(buf, window, window, &checkpoints)
                .into_iter()
                .map(f64::exp)
                .collect()
        })
        .collect()
}

fn annotate(mut e: Estimate, cfg: &PiterbargConfig) -> Estimate {
    e = e
        .with_meta("seed", cfg.seed)
        .with_meta("lambda", cfg.lambda)
        .with_meta("T", cfg.t_window)
        .with_meta("step", cfg.step);
    if cfg.paths < 100 {
        e = e.with_meta("warning", "fewer than 100 paths; standard error unreliable");
    }
    e
}

/// Sample mean of the functional over `paths` independent fields.
pub fn estimate_piterbarg(cfg: &PiterbargConfig) -> Result<Estimate> {
    cfg.validate()?;
    let samples: Vec<f64> =
        sample_profiles(cfg.t_window, cfg.step, &[cfg.lambda], cfg.paths, cfg.seed)
            .into_iter()
            .map(|v| v[0])
            .collect();
    Ok(annotate(Estimate::mean_of(&samples)?, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiterbargExtrapolation {
    pub t_window: f64,
    pub rows: Vec<LambdaRow>,
    /// `estimate(λ_{k+1}) - estimate(λ_k)`.
    pub increments: Vec<f64>,
    /// Standard errors of the increments from paired per-path differences.
    pub increment_se: Vec<f64>,
    /// Estimate at the largest `λ`.
    pub value: f64,
    /// Last increment below `max(2 SE, 1% of value)`.
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl PiterbargExtrapolation {
    /// Every increment is at most the previous one plus two combined
    /// standard errors.
    pub fn increments_shrink(&self) -> bool {
        self.increments
            .windows(2)
            .zip(self.increment_se.windows(2))
            .all(|(inc, se)| inc[1] <= inc[0] + 2.0 * (se[0] * se[0] + se[1] * se[1]).sqrt())
    }
}

/// Estimates `𝒫(λ, T)` along an increasing `λ` schedule with common random
/// numbers (each path's field for the largest `λ` serves every `λ`), and
/// reports the last value as the approximation of `𝒫(T)`.
pub fn extrapolate_piterbarg(
    t_window: f64,
    lambda_schedule: &[f64],
    base: &PiterbargConfig,
) -> Result<PiterbargExtrapolation> {
    if lambda_schedule.len() < 3 {
        return config(format!(
            "lambda schedule needs at least 3 values, got {}",
            lambda_schedule.len()
        ));
    }
    if !lambda_schedule.windows(2).all(|w| w[1] > w[0]) {
        return config("lambda schedule must be strictly increasing");
    }
    let configs: Vec<PiterbargConfig> = lambda_schedule
        .iter()
        .map(|&lambda| PiterbargConfig {
            lambda,
            t_window,
            ..*base
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }

    let profiles = sample_profiles(t_window, base.step, lambda_schedule, base.paths, base.seed);
    let column = |k: usize| -> Vec<f64> { profiles.iter().map(|v| v[k]).collect() };

    let mut rows = Vec::with_capacity(configs.len());
    for (k, cfg) in configs.iter().enumerate() {
        rows.push(LambdaRow {
            lambda: cfg.lambda,
            estimate: annotate(Estimate::mean_of(&column(k))?, cfg),
        });
    }
    let mut increments = Vec::new();
    let mut increment_se = Vec::new();
    let mut warnings = Vec::new();
    for k in 1..rows.len() {
        let diffs: Vec<f64> = profiles.iter().map(|v| v[k] - v[k - 1]).collect();
        let d = Estimate::mean_of(&diffs)?;
        let inc = rows[k].estimate.value - rows[k - 1].estimate.value;
        if inc < -2.0 * d.stderr {
            warnings.push(format!(
                "estimate decreases from lambda {} to {} beyond noise",
                rows[k - 1].lambda,
                rows[k].lambda
            ));
        }
        increments.push(inc);
        increment_se.push(d.stderr);
    }
    let last = rows.last().expect("schedule is non-empty");
    let value = last.estimate.value;
    let last_inc = *increments.last().expect("at least two increments");
    let last_se = *increment_se.last().expect("at least two increments");
    let converged = last_inc.abs() < (2.0 * last_se).max(0.01 * value);
    if base.paths < 100 {
        warnings.push("fewer than 100 paths; standard errors unreliable".to_string());
    }
    Ok(PiterbargExtrapolation {
        t_window,
        rows,
        increments,
        increment_se,
        value,
        converged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(lambda: f64, t_window: f64, step: f64, paths: u64) -> PiterbargConfig {
        PiterbargConfig {
            lambda,
            t_window,
            step,
            paths,
            seed: 42,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1.0, 0.0, 0.005, 10).validate().is_ok());
        assert!(cfg(1.0, 0.0, 0.02, 10).validate().is_err());
        assert!(cfg(1.0, 0.04, 0.01, 10).validate().is_err());
        assert!(cfg(1.0, 0.08, 0.01, 10).validate().is_ok());
        assert!(cfg(0.0, 0.0, 0.005, 10).validate().is_err());
        assert!(cfg(1.0, -1.0, 0.005, 10).validate().is_err());
        assert!(cfg(1.0, 0.0, 0.005, 0).validate().is_err());
    }

    #[test]
    fn field_shape_and_pinning() {
        let c = cfg(1.0, 0.5, 0.01, 1);
        let f = simulate_field(&c, StreamKey::new(1, 0)).unwrap();
        assert_eq!(f.origin, 50);
        assert_eq!(f.values.len(), 151);
        assert_eq!(f.at(0), 0.0);
        // Extending λ extends the same field.
        let g = simulate_field(&cfg(2.0, 0.5, 0.01, 1), StreamKey::new(1, 0)).unwrap();
        assert_eq!(f.values[..], g.values[..151]);
    }

    #[test]
    fn field_moments() {
        let c = cfg(0.5, 0.5, 0.01, 1);
        let n = 40_000u64;
        let (mut neg_sq, mut pos_sum) = (0.0, 0.0);
        for i in 0..n {
            let f = simulate_field(&c, StreamKey::new(8, i)).unwrap();
            neg_sq += f.at(-50).powi(2);
            pos_sum += f.at(50);
        }
        let var = neg_sq / n as f64;
        assert!(
            (var / 1.0 - 1.0).abs() < 0.02,
            "Var Z(-T) = {var}, want 2T = 1"
        );
        let mean = pos_sum / n as f64;
        assert!(
            (mean + 1.0).abs() < 4.0 * (2.0 * 0.5 / n as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn functional_special_cases() {
        let decreasing = Field::new((0..11).map(|k| -(k as f64)).collect(), 0, 0.1).unwrap();
        assert_eq!(sup_inf_functional(&decreasing, 1.0, 0.0).unwrap(), 1.0);
        let flat = Field::new(vec![0.3; 21], 10, 0.1).unwrap();
        assert!((sup_inf_functional(&flat, 1.0, 1.0).unwrap() - 0.3f64.exp()).abs() < 1e-15);
        assert!(matches!(
            sup_inf_functional(&flat, 2.0, 0.5),
            Err(Error::Internal(_))
        ));
        assert!(sup_inf_functional(&flat, 0.5, 1.5).is_err());
    }

    #[test]
    fn functional_lies_between_field_extremes() {
        let c = cfg(3.0, 0.5, 0.01, 1);
        for i in 0..200 {
            let f = simulate_field(&c, StreamKey::new(3, i)).unwrap();
            let v = sup_inf_functional(&f, 3.0, 0.5).unwrap();
            let lo = f.values.iter().cloned().fold(f64::INFINITY, f64::min).exp();
            let hi = f
                .values
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
                .exp();
            assert!(lo <= v && v <= hi);
            // The t = 0 term is a lower bound.
            let at_zero = f.values[..=f.origin]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
                .exp();
            assert!(v >= at_zero);
        }
    }

    proptest! {
        #[test]
        fn deque_matches_double_loop(
            values in prop::collection::vec(-3.0f64..3.0, 2..120),
            origin_frac in 0.0f64..1.0,
            w_frac in 0.0f64..1.0,
            n_frac in 0.0f64..1.0,
        ) {
            let len = values.len();
            let origin = ((len - 1) as f64 * origin_frac) as usize;
            let w = (origin as f64 * w_frac) as usize;
            let n = ((len - 1 - origin) as f64 * n_frac) as usize;
            let f = Field::new(values, origin, 1.0).unwrap();
            let fast = sup_inf_functional(&f, n as f64, w as f64).unwrap();
            let slow = sup_inf_functional_bruteforce(&f, n as f64, w as f64).unwrap();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn monotone_in_lambda_and_window(seed in 0u64..500, l1 in 0.1f64..1.0, dl in 0.0f64..1.0, t1 in 0.0f64..0.5, dt in 0.0f64..0.5) {
            let big = cfg(2.0, 1.0, 0.01, 1);
            let f = simulate_field(&big, StreamKey::new(seed, 0)).unwrap();
            let base = sup_inf_functional(&f, l1, t1).unwrap();
            prop_assert!(sup_inf_functional(&f, l1 + dl, t1).unwrap() >= base);
            prop_assert!(sup_inf_functional(&f, l1, t1 + dt).unwrap() <= base);
        }
    }

    #[test]
    fn classical_constant_is_two() {
        // Coarser than the default step for speed; the discrete grid sits a
        // few percent below 2.
        let e = estimate_piterbarg(&cfg(8.0, 0.0, 0.01, 40_000)).unwrap();
        assert!(e.value > 1.75 && e.value < 2.05, "{}", e.value);
        assert!(e.value >= 1.0);
    }

    #[test]
    fn estimates_are_ordered_and_reproducible() {
        let small = estimate_piterbarg(&cfg(2.0, 0.0, 0.01, 2_000)).unwrap();
        let large = estimate_piterbarg(&cfg(5.0, 0.0, 0.01, 2_000)).unwrap();
        assert!(small.value <= large.value);
        // With T > 0 the t = 0 term is exp(min over [-T, 0]) < 1, so the
        // estimate may fall below 1; it stays positive and below the T = 0 value.
        let wide = estimate_piterbarg(&cfg(5.0, 5.0, 0.01, 2_000)).unwrap();
        assert!(wide.value > 0.0);
        assert!(wide.value <= large.value);
        assert_eq!(
            large,
            estimate_piterbarg(&cfg(5.0, 0.0, 0.01, 2_000)).unwrap()
        );
        let few = estimate_piterbarg(&cfg(1.0, 0.0, 0.01, 50)).unwrap();
        assert!(few.meta.contains_key("warning"));
    }

    #[test]
    fn extrapolation_reuses_fields() {
        let base = cfg(1.0, 0.0, 0.01, 3_000);
        let ex = extrapolate_piterbarg(0.2, &[1.0, 2.0, 4.0], &base).unwrap();
        for row in &ex.rows {
            let single = estimate_piterbarg(&PiterbargConfig {
                lambda: row.lambda,
                t_window: 0.2,
                ..base
            })
            .unwrap();
            assert_eq!(single.value, row.estimate.value);
        }
        assert_eq!(ex.increments.len(), 2);
        assert!(ex.increments.iter().all(|&d| d >= 0.0));
        assert!(ex.warnings.is_empty());
        assert_eq!(ex.value, ex.rows[2].estimate.value);
    }

    #[test]
    fn extrapolation_preconditions() {
        let base = cfg(1.0, 0.0, 0.01, 100);
        assert!(extrapolate_piterbarg(0.0, &[1.0], &base).is_err());
        assert!(extrapolate_piterbarg(0.0, &[1.0, 2.0], &base).is_err());
        assert!(extrapolate_piterbarg(0.0, &[1.0, 3.0, 2.0], &base).is_err());
        assert!(extrapolate_piterbarg(-1.0, &[1.0, 2.0, 3.0], &base).is_err());
    }

    #[test]
    fn increments_shrink_at_zero_window() {
        let ex = extrapolate_piterbarg(0.0, &[0.5, 1.0, 2.0, 4.0], &cfg(1.0, 0.0, 0.01, 20_000))
            .unwrap();
        assert!(ex.increments_shrink(), "{:?}", ex.increments);
        assert!(ex.increments[0] > ex.increments[2]);
    }
}
