//! Simulation and closed-form toolkit for the Brownian motion risk model with
//! a constant force of interest.
//!
//! The surplus process is
//! `R(t) = e^{δt} (u + c∫₀ᵗ e^{-δs} ds - σ∫₀ᵗ e^{-δs} dB(s))`.
//! Ruin questions are answered in discounted coordinates: `R(t) < 0` exactly
//! when the discounted claim surplus `L(t) = σ∫₀ᵗ e^{-δs} dB(s) - c∫₀ᵗ e^{-δs} ds`
//! exceeds `u`.
//!
//! Modules:
//! - [`gaussian`]: normal distribution functions and keyed random streams.
//! - [`model`]: model parameters and the exact and asymptotic ruin formulas.
//! - [`pathsim`]: exact-law path simulation and ruin detection on a grid.
//! - [`piterbarg`]: Monte Carlo estimation of the generalized Piterbarg constant.
//! - [`mc`]: ruin-probability and ruin-time estimators, convergence studies.

pub mod error;
pub mod gaussian;
pub mod mc;
pub mod model;
pub mod pathsim;
pub mod piterbarg;

pub use error::{Error, Result};
pub use gaussian::{normal_cdf, normal_tail, standard_normals, StreamKey};
pub use mc::{Estimate, McConfig, RuinMode};
pub use model::{AsymptoticParams, ModelParams};
pub use pathsim::{GridSpec, PathSample, RuinOutcome, TimeGrid};
pub use piterbarg::PiterbargConfig;
