//! Certified single-photon and key-rate bounds for decoy-state QKD when the
//! source intensity is only known to lie within bounds.
//!
//! * [`source`]: photon-number statistics, coefficient bounds and the decoy conditions.
//! * [`bounds`]: exact-source and interval-robust lower bounds on the single-photon rate.
//! * [`keyrate`]: final key rate, unit conversion and relative-error sweeps.
//! * [`attack`]: pulse-level simulation of correlated intensity errors under a
//!   time-dependent eavesdropper, plus intensity filtering.
//! * [`soundness`]: randomized check of the robust bound against simulated ground truth.

pub mod attack;
pub mod bounds;
pub mod error;
pub mod keyrate;
pub mod soundness;
pub mod source;

pub use bounds::{e1_upper, naive_s1_lower, robust_s1_lower, BoundResult, ErrorRateBound, ObservedRates, QberClass};
pub use error::{Error, Result};
pub use keyrate::{binary_entropy, key_rate, key_rate_hz, sweep_delta, KeyRate, KeyRateParams, KeyRateReport, SweepRow};
pub use source::{
    check_exact_condition, check_robust_condition, coherent_coefficients, ConditionCheck, PhotonDistribution,
    ProtocolSources, SourceModel, DEFAULT_K_MAX,
};
