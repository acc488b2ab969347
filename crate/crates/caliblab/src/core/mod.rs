//! Sequences, distributions, forecasters, and exact expectations.

pub mod dist;
pub mod forecast;
pub mod rng;
pub mod seq;

pub use dist::{enumeration_cap, OutcomeDistribution, DEFAULT_ENUMERATION_CAP};
pub use forecast::{
    expected_measure, expected_measure_capped, run_forecaster, Forecaster, ForecasterSpec,
};
pub use rng::RngStream;
pub use seq::{bias_profile, BiasProfile, OutcomeSeq, PredictionSeq, Transcript};
