//! Calibration measures, forecasters, and truthfulness experiments for
//! sequential binary prediction.
//!
//! The library is organized around a small set of pieces:
//!
//! - [`core`]: outcome/prediction sequences, distributions over outcome
//!   sequences (products of Bernoullis or full conditional trees),
//!   deterministic forecasters, and exact expectations by enumeration.
//! - [`lipschitz`]: the chain-constrained linear program behind the smooth
//!   calibration error (maximize Σ Δ_i f(v_i) over 1-Lipschitz test
//!   functions into [−1,1]) and its finite grid-family oracle.
//! - [`measures`]: the calibration measures (per-value bias, smooth
//!   calibration, the subsampled smooth calibration error, distance from
//!   calibration, interval calibration, Laplace-kernel calibration, the
//!   V-shaped proper-scoring-rule regret, swap-regret bounds) plus
//!   variance/epoch diagnostics.
//! - [`forecasters`]: truthful, constant, block-sidestepping, round-based
//!   product-distribution, and bias-chasing strategies.
//! - [`opt_search`]: exact minimization of expected measures over
//!   grid-valued forecaster tables at small horizons.
//! - [`experiments`]: distribution generators, a seeded Monte Carlo
//!   harness, and the named truthfulness-gap and scaling experiments.
//! - [`cli`]: the `caliblab` binary.

pub mod cli;
pub mod core;
pub mod error;
pub mod experiments;
pub mod forecasters;
pub mod lipschitz;
pub mod measures;
pub mod opt_search;

pub use crate::core::{
    bias_profile, expected_measure, run_forecaster, BiasProfile, Forecaster, ForecasterSpec,
    OutcomeDistribution, OutcomeSeq, PredictionSeq, RngStream, Transcript,
};
pub use crate::error::{Error, Result};
