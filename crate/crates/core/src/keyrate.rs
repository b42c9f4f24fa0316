//! Final key rate `R = Delta_1' [1 - H(t_1)] - f H(t)` and its conversion to bits per second.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{e1_upper, naive_s1_lower, robust_s1_lower, BoundResult, ErrorRateBound, ObservedRates, QberClass};
use crate::error::{domain, ensure_probability, Error, Result};
use crate::source::{PhotonDistribution, ProtocolSources, SourceModel};

/// Binary Shannon entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    ensure_probability("entropy argument", x)?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Per-bit key rate together with the inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    pub delta1_prime: f64,
    pub t1: f64,
    pub t: f64,
    pub ec_efficiency: f64,
    pub r_per_bit: f64,
    /// The raw rate was negative and has been reported as zero.
    pub clamped_nonnegative: bool,
}

pub fn key_rate(delta1_prime: f64, t1: f64, t: f64, ec_efficiency: f64) -> Result<KeyRate> {
    ensure_probability("delta1'", delta1_prime)?;
    if !(ec_efficiency.is_finite() && ec_efficiency >= 1.0) {
        return Err(domain(format!("error-correction inefficiency {ec_efficiency} must be >= 1")));
    }
    let raw = delta1_prime * (1.0 - binary_entropy(t1)?) - ec_efficiency * binary_entropy(t)?;
    Ok(KeyRate {
        delta1_prime,
        t1,
        t,
        ec_efficiency,
        r_per_bit: raw.max(0.0),
        clamped_nonnegative: raw < 0.0,
    })
}

/// Conversion from per-bit rate to physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyRateParams {
    /// Pulses per second.
    pub repetition_rate: f64,
    /// Run length in seconds.
    pub duration: f64,
    pub p_mu_prime: f64,
    pub sift_factor: f64,
    pub ec_efficiency: f64,
}

impl Default for KeyRateParams {
    /// 4 MHz over 1481.2 s with BB84 basis sifting and Shannon-limit error correction.
    fn default() -> Self {
        Self { repetition_rate: 4.0e6, duration: 1481.2, p_mu_prime: 0.8, sift_factor: 0.5, ec_efficiency: 1.0 }
    }
}

impl KeyRateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.repetition_rate.is_finite() && self.repetition_rate > 0.0) {
            return Err(domain(format!("repetition_rate {} must be positive", self.repetition_rate)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(domain(format!("duration {} must be positive", self.duration)));
        }
        if !(self.p_mu_prime > 0.0 && self.p_mu_prime < 1.0) {
            return Err(domain(format!("p_mu_prime {} must lie in (0, 1)", self.p_mu_prime)));
        }
        ensure_probability("sift_factor", self.sift_factor)?;
        if !(self.ec_efficiency.is_finite() && self.ec_efficiency >= 1.0) {
            return Err(domain(format!("ec_efficiency {} must be >= 1", self.ec_efficiency)));
        }
        Ok(())
    }

    /// Signal bits per second that reach privacy amplification, per unit of `R`.
    fn sifted_signal_rate(&self, s_mu_prime: f64) -> f64 {
        s_mu_prime * self.repetition_rate * self.p_mu_prime * self.sift_factor
    }

    /// Refit `sift_factor` (the `p_mu' * sift` product is the only free knob) so
    /// that `r_per_bit` maps onto `target_hz`.
    pub fn calibrated(mut self, target_hz: f64, r_per_bit: f64, s_mu_prime: f64) -> Result<Self> {
        let unit = s_mu_prime * self.repetition_rate * self.p_mu_prime * r_per_bit;
        if !(unit > 0.0 && target_hz.is_finite() && target_hz >= 0.0) {
            return Err(Error::Undefined(format!(
                "cannot calibrate {target_hz} Hz against a per-bit rate of {r_per_bit}"
            )));
        }
        self.sift_factor = target_hz / unit;
        self.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub r_per_bit: f64,
    pub r_hz: f64,
    /// `r_hz * duration`.
    pub key_bits: f64,
    pub delta1_prime_used: f64,
    pub t1_used: f64,
    pub t_used: f64,
    pub clamped_nonnegative: bool,
}

pub fn key_rate_hz(rate: &KeyRate, obs: &ObservedRates, params: &KeyRateParams) -> KeyRateReport {
    let r_hz = rate.r_per_bit * params.sifted_signal_rate(obs.s_mu_prime);
    KeyRateReport {
        r_per_bit: rate.r_per_bit,
        r_hz,
        key_bits: r_hz * params.duration,
        delta1_prime_used: rate.delta1_prime,
        t1_used: rate.t1,
        t_used: rate.t,
        clamped_nonnegative: rate.clamped_nonnegative,
    }
}

/// Every certified intermediate of one key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub bound: BoundResult,
    pub error_rate: ErrorRateBound,
    pub report: KeyRateReport,
}

fn finish(
    bound: BoundResult,
    class_model: &SourceModel,
    obs: &ObservedRates,
    params: &KeyRateParams,
    class: QberClass,
) -> Result<PipelineResult> {
    let error_rate = e1_upper(obs, class_model, bound.s1_lower, class)?;
    let rate = key_rate(bound.delta1_prime_lower, error_rate.t1, obs.qber_signal, params.ec_efficiency)?;
    Ok(PipelineResult { bound, error_rate, report: key_rate_hz(&rate, obs, params) })
}

fn class_model(sources: &ProtocolSources, class: QberClass) -> &SourceModel {
    match class {
        QberClass::Signal => &sources.signal,
        QberClass::Decoy => &sources.decoy,
    }
}

/// Robust bound, `t_1` estimate and key rate for one set of sources.
pub fn evaluate(
    sources: &ProtocolSources,
    obs: &ObservedRates,
    params: &KeyRateParams,
    class: QberClass,
) -> Result<PipelineResult> {
    params.validate()?;
    let bound = robust_s1_lower(obs, &sources.decoy, &sources.signal)?;
    finish(bound, class_model(sources, class), obs, params, class)
}

/// Same pipeline under the exact-source assumption at the nominal intensities.
pub fn evaluate_naive(
    sources: &ProtocolSources,
    obs: &ObservedRates,
    params: &KeyRateParams,
    class: QberClass,
) -> Result<PipelineResult> {
    params.validate()?;
    let k_max = sources.decoy.k_max();
    let decoy = PhotonDistribution::coherent(sources.decoy.nominal_intensity, k_max)?;
    let signal = PhotonDistribution::coherent(sources.signal.nominal_intensity, k_max)?;
    let bound = naive_s1_lower(obs, &decoy, &signal)?;
    let exact = ProtocolSources {
        decoy: SourceModel::exact(&decoy, sources.decoy.nominal_intensity),
        signal: SourceModel::exact(&signal, sources.signal.nominal_intensity),
        ..sources.clone()
    };
    finish(bound, class_model(&exact, class), obs, params, class)
}

/// Error recorded for a sweep row that could not be certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub kind: RowErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowErrorKind {
    Domain,
    ConditionViolated,
    Numerical,
}

impl From<Error> for RowError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Domain(_) => RowErrorKind::Domain,
            Error::ConditionViolated { .. } | Error::CoefficientOrdering { .. } => RowErrorKind::ConditionViolated,
            Error::Undefined(_) => RowErrorKind::Numerical,
        };
        Self { kind, message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub outcome: std::result::Result<PipelineResult, RowError>,
}

/// Evaluate the robust pipeline at each relative error bound. Rows are
/// independent and returned in input order; a failing row does not stop the sweep.
pub fn sweep_delta(
    base: &ProtocolSources,
    obs: &ObservedRates,
    params: &KeyRateParams,
    deltas: &[f64],
    class: QberClass,
) -> Vec<SweepRow> {
    deltas
        .par_iter()
        .map(|&delta| SweepRow {
            delta,
            outcome: base
                .with_relative_error(delta)
                .and_then(|sources| evaluate(&sources, obs, params, class))
                .map_err(RowError::from),
        })
        .collect()
}
