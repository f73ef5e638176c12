//! Model parameters and the closed-form ruin formulas.
//!
//! Exact results:
//! - infinite-horizon ruin for `δ > 0`: `Ψ(√(2δ/σ²)u + √(2c²/(σ²δ))) / Ψ(√(2c²/(σ²δ)))`
//! - infinite-horizon ruin for `δ = 0`: `exp(-2cu/σ²)`
//! - finite-horizon ruin for `δ = 0`:
//!   `Ψ((u+cS)/(σ√S)) + exp(-2cu/σ²) Φ((cS-u)/(σ√S))`
//!
//! Large-reserve asymptotics (`u → ∞`, `T_u = T/u²`):
//! - Parisian ruin on `[0,S]` behaves like `𝒫(aT) Ψ(√(2δ)(u + (c/δ)(1-e^{-δS})) / (σ√(1-e^{-2δS})))`
//!   for `δ > 0` and `𝒫(bT) Ψ((u+cS)/(σ√S))` for `δ = 0`;
//! - conditionally on ruin, `u²(S + T_u - η)` is asymptotically exponential
//!   with rate `a` (`δ > 0`) or `b` (`δ = 0`).

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::gaussian::{log_normal_tail, normal_cdf, normal_tail};

/// Parameters of the risk process plus the Parisian window law
/// `T_u = t_scaled / u²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Initial reserve.
    pub u: f64,
    /// Premium rate.
    pub c: f64,
    pub sigma: f64,
    /// Force of interest.
    pub delta: f64,
    /// Horizon `S` of the ruin window.
    pub horizon: f64,
    /// `T` in `T_u = T / u²`.
    pub t_scaled: f64,
}

impl ModelParams {
    pub fn new(
        u: f64,
        c: f64,
        sigma: f64,
        delta: f64,
        horizon: f64,
        t_scaled: f64,
    ) -> Result<Self> {
        let p = Self {
            u,
            c,
            sigma,
            delta,
            horizon,
            t_scaled,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the parameter invariants, naming the first violated one.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (
                self.u.is_finite() && self.u >= 0.0,
                "u must be finite and >= 0",
            ),
            (
                self.c.is_finite() && self.c > 0.0,
                "c must be finite and > 0",
            ),
            (
                self.sigma.is_finite() && self.sigma > 0.0,
                "sigma must be finite and > 0",
            ),
            (
                self.delta.is_finite() && self.delta >= 0.0,
                "delta must be finite and >= 0",
            ),
            (
                self.horizon.is_finite() && self.horizon > 0.0,
                "S must be finite and > 0",
            ),
            (
                self.t_scaled.is_finite() && self.t_scaled >= 0.0,
                "T must be finite and >= 0",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return config(msg);
            }
        }
        Ok(())
    }

    pub fn with_u(self, u: f64) -> Self {
        Self { u, ..self }
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        Self { horizon, ..self }
    }

    pub fn with_t_scaled(self, t_scaled: f64) -> Self {
        Self { t_scaled, ..self }
    }

    /// The Parisian window `T_u = T / u²`. Zero when `T = 0`; infinite when
    /// `T > 0` and `u = 0`.
    pub fn window(&self) -> f64 {
        if self.t_scaled == 0.0 {
            0.0
        } else {
            self.t_scaled / (self.u * self.u)
        }
    }

    /// `(c/δ)(1 - e^{-δt})`, the discounted premium income up to `t`
    /// (`ct` when `δ = 0`).
    pub fn discounted_premium(&self, t: f64) -> f64 {
        if self.delta == 0.0 {
            self.c * t
        } else {
            self.c / self.delta * -(-self.delta * t).exp_m1()
        }
    }

    /// `Var X(t) = (σ²/2δ)(1 - e^{-2δt})` (`σ²t` when `δ = 0`), where
    /// `X(t) = σ∫₀ᵗ e^{-δz} dB(z)`.
    pub fn claim_variance(&self, t: f64) -> f64 {
        self.sigma * self.sigma * self.variance_clock(t)
    }

    /// `(1 - e^{-2δt}) / (2δ)`, or `t` when `δ = 0`.
    pub fn variance_clock(&self, t: f64) -> f64 {
        if self.delta == 0.0 {
            t
        } else {
            -(-2.0 * self.delta * t).exp_m1() / (2.0 * self.delta)
        }
    }

    pub fn asymptotic(&self) -> AsymptoticParams {
        AsymptoticParams::of(self)
    }
}

/// Rates of the exponential ruin-time law and of the Piterbarg argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    /// `2δ²e^{-2δS} / (σ²(1-e^{-2δS})²)`; equals `b` at `δ = 0` (its limit).
    pub a: f64,
    /// `1 / (2σ²S²)`.
    pub b: f64,
}

impl AsymptoticParams {
    pub fn of(p: &ModelParams) -> Self {
        let s2 = p.sigma * p.sigma;
        let b = 1.0 / (2.0 * s2 * p.horizon * p.horizon);
        let a = if p.delta == 0.0 {
            b
        } else {
            let d = p.delta;
            let one_minus = -(-2.0 * d * p.horizon).exp_m1();
            2.0 * d * d * (-2.0 * d * p.horizon).exp() / (s2 * one_minus * one_minus)
        };
        Self { a, b }
    }

    /// The rate that applies to `p`: `a` when `δ > 0`, `b` when `δ = 0`.
    pub fn rate(&self, p: &ModelParams) -> f64 {
        if p.delta == 0.0 {
            self.b
        } else {
            self.a
        }
    }
}

/// Exact infinite-horizon ruin probability for `δ > 0`.
pub fn psi_inf_delta(p: &ModelParams) -> Result<f64> {
    p.validate()?;
    if p.delta == 0.0 {
        return domain("psi_inf_delta requires delta > 0; use psi_inf_zero");
    }
    let s2 = p.sigma * p.sigma;
    let shift = (2.0 * p.c * p.c / (s2 * p.delta)).sqrt();
    let num = log_normal_tail((2.0 * p.delta / s2).sqrt() * p.u + shift)?;
    let den = log_normal_tail(shift)?;
    Ok((num - den).exp().min(1.0))
}

/// Exact infinite-horizon ruin probability for `δ = 0`: `exp(-2cu/σ²)`.
pub fn psi_inf_zero(p: &ModelParams) -> Result<f64> {
    p.validate()?;
    if p.delta != 0.0 {
        return domain("psi_inf_zero requires delta = 0; use psi_inf_delta");
    }
    Ok((-2.0 * p.c * p.u / (p.sigma * p.sigma)).exp())
}

/// Infinite-horizon ruin probability, dispatching on `δ`.
pub fn psi_inf(p: &ModelParams) -> Result<f64> {
    if p.delta == 0.0 {
        psi_inf_zero(p)
    } else {
        psi_inf_delta(p)
    }
}

/// Exact finite-horizon ruin probability on `[0, S]` for `δ = 0`.
pub fn psi_s_zero_exact(p: &ModelParams) -> Result<f64> {
    p.validate()?;
    if p.delta != 0.0 {
        return domain("psi_s_zero_exact requires delta = 0");
    }
    let scale = p.sigma * p.horizon.sqrt();
    let first = normal_tail((p.u + p.c * p.horizon) / scale)?;
    let second = normal_cdf((p.c * p.horizon - p.u) / scale)?;
    let value = first + (-2.0 * p.c * p.u / (p.sigma * p.sigma)).exp() * second;
    Ok(value.min(1.0))
}

/// The normal-tail argument of the large-reserve ruin asymptotic.
pub fn asymptotic_argument(p: &ModelParams) -> f64 {
    if p.delta == 0.0 {
        (p.u + p.c * p.horizon) / (p.sigma * p.horizon.sqrt())
    } else {
        let d = p.delta;
        (2.0 * d).sqrt() * (p.u + p.discounted_premium(p.horizon))
            / (p.sigma * (-(-2.0 * d * p.horizon).exp_m1()).sqrt())
    }
}

/// Large-reserve approximation of the Parisian ruin probability,
/// `𝒫 · Ψ(argument)`, where `piterbarg_value` estimates `𝒫(aT)` (`δ > 0`)
/// or `𝒫(bT)` (`δ = 0`). With `T = 0` pass the exact value 2.
pub fn parisian_asymptotic(p: &ModelParams, piterbarg_value: f64) -> Result<f64> {
    p.validate()?;
    if !(piterbarg_value.is_finite() && piterbarg_value > 0.0) {
        return domain(format!(
            "piterbarg value must be finite and > 0, got {piterbarg_value}"
        ));
    }
    if p.u <= 0.0 {
        return domain("parisian_asymptotic requires u > 0");
    }
    Ok(piterbarg_value * normal_tail(asymptotic_argument(p))?)
}

/// The argument `aT` (`δ > 0`) or `bT` (`δ = 0`) at which the Piterbarg
/// constant enters the Parisian asymptotic.
pub fn piterbarg_argument(p: &ModelParams) -> f64 {
    p.asymptotic().rate(p) * p.t_scaled
}

/// Limiting conditional tail `P(u²(S + T_u - η) > x | η ≤ S + T_u) ≈ e^{-rate·x}`.
pub fn ruin_time_tail_asymptotic(p: &ModelParams, x: f64) -> Result<f64> {
    p.validate()?;
    if !(x.is_finite() && x >= 0.0) {
        return domain(format!("x must be finite and >= 0, got {x}"));
    }
    Ok((-p.asymptotic().rate(p) * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(u: f64, c: f64, sigma: f64, delta: f64, s: f64) -> ModelParams {
        ModelParams::new(u, c, sigma, delta, s, 0.0).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        let err = ModelParams::new(1.0, 0.0, 1.0, 0.0, 1.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("c must be"));
        assert!(ModelParams::new(-1.0, 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, -1.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, -0.1, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 0.0, 1.0, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn window_scales_with_inverse_square_of_u() {
        let p = ModelParams::new(4.0, 1.0, 1.0, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(p.window(), 2.0 / 16.0);
        assert_eq!(p.window() * p.u * p.u, p.t_scaled);
        assert_eq!(p.with_t_scaled(0.0).with_u(0.0).window(), 0.0);
    }

    #[test]
    fn psi_inf_delta_values() {
        assert!((psi_inf_delta(&params(0.0, 1.0, 1.0, 1.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        // Ψ(2√2)/Ψ(√2) from a 40-digit evaluation.
        let v = psi_inf_delta(&params(1.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((v - 0.029_737_816_666_500_397).abs() < 1e-13, "{v}");
        assert!(psi_inf_delta(&params(1.0, 1.0, 1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn psi_inf_zero_values() {
        assert_eq!(psi_inf_zero(&params(0.0, 1.0, 1.0, 0.0, 1.0)).unwrap(), 1.0);
        let v = psi_inf_zero(&params(1.0, 1.0, 2f64.sqrt(), 0.0, 1.0)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367_879).abs() < 1e-6);
        let v = psi_inf_zero(&params(2.0, 1.0, 1.0, 0.0, 1.0)).unwrap();
        assert!((v - 0.018_316).abs() < 1e-6);
        assert!(psi_inf_zero(&params(1.0, 1.0, 1.0, 0.5, 1.0)).is_err());
    }

    #[test]
    fn finite_horizon_exact_values() {
        let one = psi_s_zero_exact(&params(0.0, 1.0, 1.0, 0.0, 1.0)).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        // Ψ(2) + e^{-2}Φ(0) from a 40-digit evaluation.
        let v = psi_s_zero_exact(&params(1.0, 1.0, 1.0, 0.0, 1.0)).unwrap();
        assert!((v - 0.090_417_773_566_485_55).abs() < 1e-14, "{v}");
        assert!(psi_s_zero_exact(&params(1.0, 1.0, 1.0, 0.1, 1.0)).is_err());
    }

    #[test]
    fn finite_horizon_approaches_twice_the_tail() {
        let ratio = |u: f64| {
            let p = params(u, 1.0, 1.0, 0.0, 1.0);
            psi_s_zero_exact(&p).unwrap() / (2.0 * normal_tail(u + 1.0).unwrap())
        };
        let mut last = f64::INFINITY;
        for u in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let r = ratio(u);
            assert!(r > 1.0 && r < last, "u={u} ratio={r}");
            last = r;
        }
        assert!(last - 1.0 < 0.05);
    }

    #[test]
    fn asymptotic_rates() {
        let p = params(1.0, 1.0, 1.0, 0.0, 1.0);
        assert_eq!(p.asymptotic().b, 0.5);
        assert_eq!(p.asymptotic().rate(&p), 0.5);
        let q = params(1.0, 1.0, 1.0, 1.0, 1.0);
        // 2e^{-2}/(1-e^{-2})² to 16 digits.
        assert!((q.asymptotic().a - 0.362_030_830_483_155_2).abs() < 1e-14);
        for d in [1e-6, 1e-9] {
            let r = params(1.0, 1.0, 1.3, d, 0.7).asymptotic();
            assert!(
                ((r.a - r.b) / r.b).abs() < 1e-5,
                "delta={d}: {} vs {}",
                r.a,
                r.b
            );
        }
        let tiny = params(1.0, 1.0, 1.0, 1e-9, 1.0).asymptotic();
        assert!(((tiny.a - tiny.b) / tiny.b).abs() < 1e-6);
    }

    #[test]
    fn ruin_time_tail_values() {
        let p = params(1.0, 1.0, 1.0, 0.0, 1.0);
        assert_eq!(ruin_time_tail_asymptotic(&p, 0.0).unwrap(), 1.0);
        let v = ruin_time_tail_asymptotic(&p, 2.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        let q = params(1.0, 1.0, 1.0, 1.0, 1.0);
        let v = ruin_time_tail_asymptotic(&q, 1.0).unwrap();
        assert!((v - 0.696_260_901_450_869_2).abs() < 1e-14, "{v}");
        assert!(ruin_time_tail_asymptotic(&p, -0.1).is_err());
        assert!(ruin_time_tail_asymptotic(&p, f64::NAN).is_err());
    }

    #[test]
    fn parisian_asymptotic_special_cases() {
        let p = params(3.0, 1.0, 1.0, 0.0, 1.0);
        let v = parisian_asymptotic(&p, 2.0).unwrap();
        assert!((v - 2.0 * normal_tail(4.0).unwrap()).abs() < 1e-18);

        let q = params(3.0, 0.5, 1.2, 0.8, 2.0);
        let d = q.delta;
        let arg = (2.0 * d).sqrt() * (q.u + q.c / d * (1.0 - (-d * q.horizon).exp()))
            / (q.sigma * (1.0 - (-2.0 * d * q.horizon).exp()).sqrt());
        let v = parisian_asymptotic(&q, 2.0).unwrap();
        let want = 2.0 * normal_tail(arg).unwrap();
        assert!(((v - want) / want).abs() < 1e-12);

        assert!(parisian_asymptotic(&q, 0.0).is_err());
        assert!(parisian_asymptotic(&q, -1.0).is_err());
        assert!(parisian_asymptotic(&q.with_u(0.0), 2.0).is_err());
        assert!(parisian_asymptotic(&q, 1.5).unwrap() <= v);
    }

    #[test]
    fn parisian_asymptotic_is_continuous_at_zero_interest() {
        for u in [0.5, 2.0, 5.0] {
            let zero = params(u, 1.0, 1.0, 0.0, 1.0);
            let small = params(u, 1.0, 1.0, 1e-9, 1.0);
            let a = parisian_asymptotic(&zero, 1.7).unwrap();
            let b = parisian_asymptotic(&small, 1.7).unwrap();
            assert!(((a - b) / a).abs() < 1e-5, "u={u}: {a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn finite_horizon_is_monotone_and_bounded(
            u in 0.0f64..5.0, du in 0.01f64..1.0,
            s in 0.1f64..3.0, ds in 0.01f64..1.0,
            c in 0.1f64..2.0, sigma in 0.3f64..2.0,
        ) {
            let p = params(u, c, sigma, 0.0, s);
            let v = psi_s_zero_exact(&p).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(psi_s_zero_exact(&p.with_u(u + du)).unwrap() < v || v < 1e-300);
            prop_assert!(psi_s_zero_exact(&p.with_horizon(s + ds)).unwrap() > v || u == 0.0);
            prop_assert!(v <= psi_inf_zero(&p).unwrap() + 1e-15);
        }

        #[test]
        fn infinite_horizon_decreases_in_reserve(
            u in 0.0f64..5.0, du in 0.01f64..1.0,
            delta in 0.01f64..3.0, c in 0.1f64..2.0, sigma in 0.3f64..2.0,
        ) {
            let p = params(u, c, sigma, delta, 1.0);
            let v = psi_inf_delta(&p).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            prop_assert!(psi_inf_delta(&p.with_u(u + du)).unwrap() < v);
        }
    }
}
