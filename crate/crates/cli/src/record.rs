//! Run records (one JSON object per line) and CSV tables.

use std::fmt::Write as _;

use parisian_core::mc::{RuinTimeTail, StudyRow};
use parisian_core::piterbarg::PiterbargExtrapolation;
use parisian_core::{Estimate, McConfig, ModelParams, PiterbargConfig, RuinMode};
use serde::{Deserialize, Serialize};

/// Everything needed to reproduce and audit one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub params: Option<ModelParams>,
    pub config: RunConfig,
    pub result: RunResult,
    /// Seconds; the only field that may differ between identical runs.
    pub wall_time: f64,
}

impl RunRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records contain no non-finite floats")
    }

    pub fn from_json_line(line: &str) -> serde_json::Result<Self> {
        serde_json::from_str(line)
    }
}

/// Echo of the resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunConfig {
    Formulas {
        piterbarg_value: Option<f64>,
        xs: Vec<f64>,
    },
    Estimate {
        mc: McConfig,
        mode: RuinMode,
    },
    Piterbarg {
        base: PiterbargConfig,
        lambdas: Vec<f64>,
    },
    Study {
        mc: McConfig,
        us: Vec<f64>,
        piterbarg_value: f64,
    },
    RuinTime {
        mc: McConfig,
        xs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunResult {
    Formulas(FormulasReport),
    Estimate(EstimateReport),
    Piterbarg(PiterbargExtrapolation),
    Study { rows: Vec<StudyRow> },
    RuinTime(RuinTimeReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulasReport {
    /// Infinite-horizon classical ruin probability for the given `δ`.
    pub psi_inf: f64,
    /// Finite-horizon closed form, `δ = 0` only.
    pub psi_s_exact: Option<f64>,
    pub a: f64,
    pub b: f64,
    /// The rate that applies: `a` for `δ > 0`, `b` for `δ = 0`.
    pub rate: f64,
    /// Argument `rate·T` at which the Piterbarg constant enters.
    pub piterbarg_argument: f64,
    pub piterbarg_value: Option<f64>,
    pub parisian_asymptotic: Option<f64>,
    pub ruin_time_tail: Vec<TailPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: Estimate,
    pub grid_nodes: usize,
    /// Closed-form value where one is known.
    pub exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuinTimeReport {
    pub tail: RuinTimeTail,
    pub sup_distance: Option<f64>,
}

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// `u,mc,se,asymptotic,ratio`; `ratio` is empty where the estimate is 0.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("u,mc,se,asymptotic,ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(r.u),
            fmt_float(r.mc.value),
            fmt_float(r.mc.stderr),
            fmt_float(r.asymptotic),
            opt(r.ratio)
        );
    }
    out
}

/// `x,empirical_tail,theory_tail`.
pub fn tail_csv(tail: &RuinTimeTail) -> String {
    let mut out = String::from("x,empirical_tail,theory_tail\n");
    for r in &tail.rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_float(r.x),
            fmt_float(r.tail.value),
            fmt_float(r.theory)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            2.0f64.sqrt(),
            5e-324,
            f64::MAX,
            -0.0904177735664855,
        ] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
    }
}
