//! Exact-law simulation of the discounted claim surplus and ruin detection.
//!
//! With `X(s) = σ∫₀ˢ e^{-δz} dB(z)` the process
//! `L(s) = X(s) - (c/δ)(1 - e^{-δs})` (or `σB(s) - cs` when `δ = 0`)
//! satisfies `R(s) < 0 ⇔ L(s) > u`. `X` has independent Gaussian increments
//! with variance `σ² e^{-2δt₁} (1 - e^{-2δ(t₂-t₁)}) / (2δ)` over `[t₁, t₂]`, so
//! sampling at grid nodes carries no discretization error. Ruin is only
//! checked at nodes, which biases classical ruin low.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::gaussian::StreamKey;
use crate::model::ModelParams;

/// Relative tolerance used when comparing node times with `S` and window ends.
const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum GridPolicy {
    Uniform {
        step: f64,
    },
    Adaptive {
        base_step: f64,
        fine_step: f64,
        fine_window: f64,
    },
    VarianceClock {
        clock_step: f64,
        fine_step: f64,
    },
}

/// How to lay out simulation nodes for a given set of parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// One spacing on all of `[0, S + T_u]`.
    Uniform { step: f64 },
    /// `base_step` on `[0, S - fine_window]`, `fine_step` on `[S - fine_window, S + T_u]`.
    Fixed {
        base_step: f64,
        fine_step: f64,
        fine_window: f64,
    },
    /// As `Fixed` with `fine_window = min(S, max(10/u², 0.05 S))`.
    Adaptive { base_step: f64, fine_step: f64 },
    /// Nodes equally spaced in `Var X(t)/σ²` on `[0, S]`, then `fine_step`
    /// on `[S, S + T_u]`. Suits `δ > 0` with long horizons.
    VarianceClock { clock_step: f64, fine_step: f64 },
}

impl GridSpec {
    pub fn uniform(step: f64) -> Self {
        GridSpec::Uniform { step }
    }

    pub fn build(&self, p: &ModelParams) -> Result<TimeGrid> {
        match *self {
            GridSpec::Uniform { step } => build_grid(p, step, step, p.horizon),
            GridSpec::Fixed {
                base_step,
                fine_step,
                fine_window,
            } => build_grid(p, base_step, fine_step, fine_window),
            GridSpec::Adaptive {
                base_step,
                fine_step,
            } => build_grid(p, base_step, fine_step, default_fine_window(p)),
            GridSpec::VarianceClock {
                clock_step,
                fine_step,
            } => build_variance_clock_grid(p, clock_step, fine_step),
        }
    }
}

/// Simulation nodes on `[0, S + T_u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    policy: GridPolicy,
}

impl TimeGrid {
    /// Builds a grid from explicit nodes. They must start at 0 and increase
    /// strictly.
    pub fn from_nodes(nodes: Vec<f64>, policy: GridPolicy) -> Result<Self> {
        if nodes.first() != Some(&0.0) {
            return config("grid must start at 0");
        }
        if !nodes.windows(2).all(|w| w[1] > w[0] && w[1].is_finite()) {
            return config("grid nodes must be finite and strictly increasing");
        }
        Ok(Self { nodes, policy })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().expect("grid has at least one node")
    }

    pub fn policy(&self) -> GridPolicy {
        self.policy
    }
}

/// Default fine-window width `min(S, max(10/u², 0.05 S))`.
pub fn default_fine_window(p: &ModelParams) -> f64 {
    if p.u == 0.0 {
        return p.horizon;
    }
    (10.0 / (p.u * p.u)).max(0.05 * p.horizon).min(p.horizon)
}

fn check_window(p: &ModelParams, fine_step: f64) -> Result<f64> {
    let window = p.window();
    if !window.is_finite() {
        return config("T_u = T/u^2 is infinite (u = 0 with T > 0)");
    }
    if window > 0.0 && fine_step > window / 8.0 {
        return config(format!(
            "fine_step {fine_step} exceeds T_u/8 = {} (T_u = {window})",
            window / 8.0
        ));
    }
    Ok(window)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        config(format!("{name} must be finite and > 0, got {v}"))
    }
}

/// Appends the nodes of `(a, b]` with spacing at most `step`. When the
/// segment length is an integer multiple of `step` the nodes are `a + k·step`,
/// so grids sharing a segment start share a node prefix bit for bit.
fn push_segment(nodes: &mut Vec<f64>, a: f64, b: f64, step: f64) {
    let len = b - a;
    if len <= TIME_TOL * b.abs().max(1.0) {
        return;
    }
    let q = len / step;
    let nearest = q.round();
    if nearest >= 1.0 && (q - nearest).abs() <= 1e-9 * q.max(1.0) {
        let n = nearest as usize;
        nodes.extend((1..=n).map(|k| a + k as f64 * step));
    } else {
        let n = q.ceil().max(1.0) as usize;
        nodes.extend((1..n).map(|k| a + len * (k as f64 / n as f64)));
        nodes.push(b);
    }
}

/// Piecewise-uniform grid: `base_step` on `[0, S - fine_window]` and
/// `fine_step` on `[S - fine_window, S + T_u]`. `S` is always a node.
pub fn build_grid(
    p: &ModelParams,
    base_step: f64,
    fine_step: f64,
    fine_window: f64,
) -> Result<TimeGrid> {
    p.validate()?;
    positive("base_step", base_step)?;
    positive("fine_step", fine_step)?;
    if fine_step > base_step {
        return config(format!(
            "fine_step {fine_step} must not exceed base_step {base_step}"
        ));
    }
    if !(fine_window >= 0.0 && fine_window <= p.horizon) {
        return config(format!(
            "fine_window {fine_window} must lie in [0, S = {}]",
            p.horizon
        ));
    }
    let window = check_window(p, fine_step)?;
    let s = p.horizon;
    let split = s - fine_window;

    let mut nodes = vec![0.0];
    push_segment(&mut nodes, 0.0, split, base_step);
    push_segment(&mut nodes, split, s, fine_step);
    push_segment(&mut nodes, s, s + window, fine_step);

    let policy = if fine_window == s || base_step == fine_step {
        GridPolicy::Uniform { step: fine_step }
    } else {
        GridPolicy::Adaptive {
            base_step,
            fine_step,
            fine_window,
        }
    };
    TimeGrid::from_nodes(nodes, policy)
}

/// Grid equally spaced in the variance clock `(1 - e^{-2δt})/(2δ)` on `[0, S]`
/// with at most `clock_step` per cell. When `T_u > 0` cells longer than
/// `fine_step` in real time are split and `[S, S + T_u]` uses `fine_step`.
pub fn build_variance_clock_grid(
    p: &ModelParams,
    clock_step: f64,
    fine_step: f64,
) -> Result<TimeGrid> {
    p.validate()?;
    positive("clock_step", clock_step)?;
    positive("fine_step", fine_step)?;
    let window = check_window(p, fine_step)?;
    let s = p.horizon;
    let total = p.variance_clock(s);
    let n = (total / clock_step).ceil().max(1.0) as usize;

    let inverse = |v: f64| {
        if p.delta == 0.0 {
            v
        } else {
            -(-2.0 * p.delta * v).ln_1p() / (2.0 * p.delta)
        }
    };
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(0.0);
    for k in 1..n {
        let t = inverse(total * (k as f64 / n as f64));
        let prev = *nodes.last().unwrap();
        if window > 0.0 {
            push_segment(&mut nodes, prev, t, fine_step);
        } else {
            nodes.push(t);
        }
    }
    let prev = *nodes.last().unwrap();
    if window > 0.0 {
        push_segment(&mut nodes, prev, s, fine_step);
    } else {
        nodes.push(s);
    }
    push_segment(&mut nodes, s, s + window, fine_step);
    TimeGrid::from_nodes(
        nodes,
        GridPolicy::VarianceClock {
            clock_step,
            fine_step,
        },
    )
}

/// Increment standard deviations and premium offsets of `L` on a grid.
#[derive(Debug, Clone)]
pub struct PathLaw {
    /// Standard deviation of `X(t_i) - X(t_{i-1})`, indexed by `i - 1`.
    increment_sd: Vec<f64>,
    /// `(c/δ)(1 - e^{-δ t_i})` per node.
    premium: Vec<f64>,
}

impl PathLaw {
    pub fn new(p: &ModelParams, grid: &TimeGrid) -> Self {
        let t = grid.nodes();
        let increment_sd = t
            .windows(2)
            .map(|w| increment_variance(p, w[0], w[1]).sqrt())
            .collect();
        let premium = t.iter().map(|&s| p.discounted_premium(s)).collect();
        Self {
            increment_sd,
            premium,
        }
    }

    pub fn increment_variances(&self) -> impl Iterator<Item = f64> + '_ {
        self.increment_sd.iter().map(|s| s * s)
    }
}

/// `Var(X(t1) - X(t0)) = σ² e^{-2δ t0} (1 - e^{-2δ(t1-t0)}) / (2δ)`.
pub fn increment_variance(p: &ModelParams, t0: f64, t1: f64) -> f64 {
    let decay = if p.delta == 0.0 {
        1.0
    } else {
        (-2.0 * p.delta * t0).exp()
    };
    decay * p.claim_variance(t1 - t0)
}

/// Values of `L` at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample<'g> {
    pub grid: &'g TimeGrid,
    pub values: Vec<f64>,
}

impl<'g> PathSample<'g> {
    pub fn new(grid: &'g TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return config(format!(
                "path has {} values for {} grid nodes",
                values.len(),
                grid.len()
            ));
        }
        Ok(Self { grid, values })
    }
}

/// Samples `L` at the nodes of `grid` using the stream `key`.
pub fn simulate_path<'g>(p: &ModelParams, grid: &'g TimeGrid, key: StreamKey) -> PathSample<'g> {
    let law = PathLaw::new(p, grid);
    simulate_with_law(&law, grid, key)
}

pub fn simulate_with_law<'g>(law: &PathLaw, grid: &'g TimeGrid, key: StreamKey) -> PathSample<'g> {
    let mut normals = key.normals();
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    let mut x = 0.0;
    for (sd, premium) in law.increment_sd.iter().zip(&law.premium[1..]) {
        x += sd * normals.next_normal();
        values.push(x - premium);
    }
    PathSample { grid, values }
}

/// Classical and Parisian ruin on one path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RuinOutcome {
    pub classical_ruined: bool,
    /// First node time in `[0, S]` with `L > u`.
    pub tau: Option<f64>,
    pub parisian_ruined: bool,
    /// `t + T_u` for the first node `t ≤ S` whose window `[t, t + T_u]` has
    /// `L > u` at every node.
    pub eta: Option<f64>,
}

impl RuinOutcome {
    fn new(tau: Option<f64>, eta: Option<f64>) -> Self {
        Self {
            classical_ruined: tau.is_some(),
            tau,
            parisian_ruined: eta.is_some(),
            eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scan {
    Continue,
    Done,
}

/// Single pass detector. Only the start of each excursion above `u` can open
/// a Parisian window: if the window anchored at the excursion start fails,
/// every later anchor in the same excursion needs an even longer stretch.
#[derive(Debug)]
pub(crate) struct RuinScanner<'a> {
    times: &'a [f64],
    u: f64,
    window: f64,
    horizon_limit: f64,
    tol: f64,
    tau: Option<f64>,
    anchor: Option<(f64, f64)>,
    eta: Option<f64>,
}

impl<'a> RuinScanner<'a> {
    pub(crate) fn new(times: &'a [f64], p: &ModelParams) -> Self {
        let window = p.window();
        let tol = TIME_TOL * (p.horizon + window).max(1.0);
        Self {
            times,
            u: p.u,
            window,
            horizon_limit: p.horizon + tol,
            tol,
            tau: None,
            anchor: None,
            eta: None,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, k: usize, value: f64) -> Scan {
        let t = self.times[k];
        if value > self.u {
            if t <= self.horizon_limit {
                if self.tau.is_none() {
                    self.tau = Some(t);
                }
                if self.anchor.is_none() {
                    self.anchor = Some((t, t + self.window + self.tol));
                }
            }
            if let Some((start, end_limit)) = self.anchor {
                let last_in_window = self.times.get(k + 1).is_none_or(|&next| next > end_limit);
                if last_in_window {
                    self.eta = Some(start + self.window);
                    return Scan::Done;
                }
            }
        } else {
            self.anchor = None;
        }
        if self.anchor.is_none() && t > self.horizon_limit {
            Scan::Done
        } else {
            Scan::Continue
        }
    }

    pub(crate) fn outcome(&self) -> RuinOutcome {
        RuinOutcome::new(self.tau, self.eta)
    }
}

/// Classical and Parisian ruin of a sampled path, in one pass.
pub fn detect_ruin(path: &PathSample<'_>, p: &ModelParams) -> RuinOutcome {
    debug_assert!(path.grid.end() >= p.horizon + p.window() - 1e-9);
    let mut scan = RuinScanner::new(path.grid.nodes(), p);
    for (k, &v) in path.values.iter().enumerate() {
        if scan.push(k, v) == Scan::Done {
            break;
        }
    }
    scan.outcome()
}

/// Reference detector: checks every candidate window node by node.
/// Quadratic in the window length; meant for testing.
pub fn detect_ruin_bruteforce(path: &PathSample<'_>, p: &ModelParams) -> RuinOutcome {
    let t = path.grid.nodes();
    let v = &path.values;
    let window = p.window();
    let tol = TIME_TOL * (p.horizon + window).max(1.0);
    let last_start = p.horizon + tol;

    let tau = (0..t.len())
        .take_while(|&i| t[i] <= last_start)
        .find(|&i| v[i] > p.u)
        .map(|i| t[i]);

    let mut eta = None;
    for i in (0..t.len()).take_while(|&i| t[i] <= last_start) {
        let end = t[i] + window + tol;
        let mut all_above = true;
        let mut j = i;
        while j < t.len() && t[j] <= end {
            if v[j] <= p.u {
                all_above = false;
                break;
            }
            j += 1;
        }
        if all_above {
            eta = Some(t[i] + window);
            break;
        }
    }
    RuinOutcome::new(tau, eta)
}

/// Simulation and detection fused into one loop, stopping as soon as the
/// outcome is settled. Produces exactly what
/// `detect_ruin(&simulate_path(..))` produces for the same key.
#[derive(Debug, Clone)]
pub struct PathKernel {
    params: ModelParams,
    grid: TimeGrid,
    law: PathLaw,
}

impl PathKernel {
    pub fn new(params: ModelParams, grid: TimeGrid) -> Self {
        let law = PathLaw::new(&params, &grid);
        Self { params, grid, law }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn run(&self, key: StreamKey) -> RuinOutcome {
        let mut normals = key.normals();
        let mut scan = RuinScanner::new(self.grid.nodes(), &self.params);
        if scan.push(0, 0.0) == Scan::Done {
            return scan.outcome();
        }
        let mut x = 0.0;
        for (i, (sd, premium)) in self
            .law
            .increment_sd
            .iter()
            .zip(&self.law.premium[1..])
            .enumerate()
        {
            x += sd * normals.next_normal();
            if scan.push(i + 1, x - premium) == Scan::Done {
                break;
            }
        }
        scan.outcome()
    }
}

/// Inserts the midpoint of every cell, sampled from the exact conditional
/// (Brownian bridge) law given the existing node values. Existing nodes keep
/// their values, so the discrete maximum can only grow.
pub fn refine_midpoints(
    path: &PathSample<'_>,
    p: &ModelParams,
    key: StreamKey,
) -> Result<(TimeGrid, Vec<f64>)> {
    let t = path.grid.nodes();
    let mut normals = key.normals();
    let mut nodes = Vec::with_capacity(2 * t.len());
    let mut values = Vec::with_capacity(2 * t.len());
    nodes.push(t[0]);
    values.push(path.values[0]);
    for i in 1..t.len() {
        let (t0, t1) = (t[i - 1], t[i]);
        let tm = 0.5 * (t0 + t1);
        let x0 = path.values[i - 1] + p.discounted_premium(t0);
        let x1 = path.values[i] + p.discounted_premium(t1);
        let left = increment_variance(p, t0, tm);
        let right = increment_variance(p, tm, t1);
        let total = left + right;
        let mean = x0 + left / total * (x1 - x0);
        let sd = (left * right / total).sqrt();
        let xm = mean + sd * normals.next_normal();
        if tm > t0 && tm < t1 {
            nodes.push(tm);
            values.push(xm - p.discounted_premium(tm));
        }
        nodes.push(t1);
        values.push(path.values[i]);
    }
    let grid = TimeGrid::from_nodes(nodes, path.grid.policy())?;
    Ok((grid, values))
}
