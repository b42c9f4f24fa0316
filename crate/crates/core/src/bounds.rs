//! Lower bounds on the single-photon counting rate.
//!
//! Two routes eliminate the unknown multi-photon contribution from the decoy
//! and signal counting rates:
//!
//! * [`naive_s1_lower`] assumes every pulse of a class is in exactly the same
//!   state. It is only sound when that assumption holds; fed with an averaged
//!   state under correlated intensity errors it can overestimate.
//! * [`robust_s1_lower`] only assumes per-pulse coefficients lie within
//!   `[a_k^L, a_k^U]` and stays sound for any error pattern, including one
//!   known to the eavesdropper.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_probability, Error, Result};
use crate::source::{check_exact_condition, check_robust_condition, PhotonDistribution, SourceModel};

/// Counting rates and error rates measured in the protocol.
///
/// No ordering between the three rates is assumed; an adversarial channel
/// is free to break `S_0 <= S_mu <= S_mu'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedRates {
    pub s0: f64,
    pub s_mu: f64,
    pub s_mu_prime: f64,
    pub qber_signal: f64,
    pub qber_decoy: f64,
}

impl ObservedRates {
    /// Detector observations from the 50 km experiment reported alongside the
    /// intensity-error table (1481.2 s at 4 MHz).
    pub const FIFTY_KM: Self = Self {
        s0: 2.609e-5,
        s_mu: 1.548e-4,
        s_mu_prime: 3.817e-4,
        qber_signal: 0.04247,
        qber_decoy: 0.08379,
    };

    pub fn validate(&self) -> Result<()> {
        ensure_probability("s0", self.s0)?;
        ensure_probability("s_mu", self.s_mu)?;
        ensure_probability("s_mu_prime", self.s_mu_prime)?;
        ensure_probability("qber_signal", self.qber_signal)?;
        ensure_probability("qber_decoy", self.qber_decoy)
    }
}

/// Certified quantities produced by either bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// Lower bound on the single-photon counting rate. For the robust route this
    /// bounds the mean single-photon detection weight `N^-1 sum_{i in l_1} d_i`.
    pub s1_lower: f64,
    /// Lower bound on the single-photon fraction of signal counts.
    pub delta1_prime_lower: f64,
    /// Lower bound on the single-photon fraction of decoy counts.
    pub delta1_lower: f64,
    /// Implied upper bound on the decoy multi-photon term (naive route only).
    pub lambda_upper: Option<f64>,
    pub condition_ok: bool,
    /// Raw algebra left `[0, 1]` for at least one of the three bounds.
    pub clamped: bool,
}

fn clamp_unit(x: f64, clamped: &mut bool) -> f64 {
    if x < 0.0 {
        *clamped = true;
        0.0
    } else if x > 1.0 {
        *clamped = true;
        1.0
    } else {
        x
    }
}

/// `single_photon_rate / class_rate`, with 0/0 read as "no single-photon counts".
fn fraction(name: &str, single: f64, class_rate: f64) -> Result<f64> {
    if class_rate > 0.0 {
        Ok(single / class_rate)
    } else if single <= 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Undefined(format!(
            "{name}: class counting rate is zero but the single-photon bound is {single:e}"
        )))
    }
}

/// Exact-source bound
/// `s_1 >= [a'_2 (S_mu - a_0 S_0) - a_2 (S_mu' - a'_0 S_0)] / (a'_2 a_1 - a'_1 a_2)`.
pub fn naive_s1_lower(
    obs: &ObservedRates,
    decoy: &PhotonDistribution,
    signal: &PhotonDistribution,
) -> Result<BoundResult> {
    obs.validate()?;
    check_exact_condition(decoy, signal)?.into_result()?;
    let [a0, a1, a2] = [0, 1, 2].map(|k| decoy.coefficient(k));
    let [b0, b1, b2] = [0, 1, 2].map(|k| signal.coefficient(k));
    let denominator = b2 * a1 - b1 * a2;
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::CoefficientOrdering { denominator });
    }
    let raw = (b2 * (obs.s_mu - a0 * obs.s0) - a2 * (obs.s_mu_prime - b0 * obs.s0)) / denominator;

    let mut clamped = false;
    let delta1_prime = fraction("delta1'", b1 * raw, obs.s_mu_prime)?;
    let delta1 = fraction("delta1", a1 * raw, obs.s_mu)?;
    let s1_lower = clamp_unit(raw, &mut clamped);
    let lambda = obs.s_mu - a0 * obs.s0 - a1 * s1_lower;
    Ok(BoundResult {
        s1_lower,
        delta1_prime_lower: clamp_unit(delta1_prime, &mut clamped),
        delta1_lower: clamp_unit(delta1, &mut clamped),
        lambda_upper: Some(lambda.clamp(0.0, 1.0)),
        condition_ok: true,
        clamped,
    })
}

/// Interval-robust bound on `N^-1 sum_{i in l_1} d_i`:
///
/// ```text
///   a'_2^L S_mu - a_2^U S_mu' + a'_0^L a_2^U S_0 - a_0^U a'_2^L S_0
///   ---------------------------------------------------------------
///                 a'_2^L a_1^U - a'_1^L a_2^U
/// ```
///
/// The single-photon fractions follow by scaling with `a'_1^L / S_mu'` and
/// `a_1^L / S_mu`. Refuses to produce a number when the robust condition fails.
pub fn robust_s1_lower(
    obs: &ObservedRates,
    decoy: &SourceModel,
    signal: &SourceModel,
) -> Result<BoundResult> {
    obs.validate()?;
    decoy.validate()?;
    signal.validate()?;
    check_robust_condition(decoy, signal)?.into_result()?;
    let denominator = signal.lo(2) * decoy.hi(1) - signal.lo(1) * decoy.hi(2);
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::CoefficientOrdering { denominator });
    }
    let numerator = signal.lo(2) * obs.s_mu - decoy.hi(2) * obs.s_mu_prime
        + signal.lo(0) * decoy.hi(2) * obs.s0
        - decoy.hi(0) * signal.lo(2) * obs.s0;
    let raw = numerator / denominator;

    let mut clamped = false;
    let delta1_prime = fraction("delta1'", signal.lo(1) * raw, obs.s_mu_prime)?;
    let delta1 = fraction("delta1", decoy.lo(1) * raw, obs.s_mu)?;
    Ok(BoundResult {
        s1_lower: clamp_unit(raw, &mut clamped),
        delta1_prime_lower: clamp_unit(delta1_prime, &mut clamped),
        delta1_lower: clamp_unit(delta1, &mut clamped),
        lambda_upper: None,
        condition_ok: true,
        clamped,
    })
}

/// Which class's QBER feeds the single-photon error-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QberClass {
    /// `t` over signal counts with the signal source model.
    #[default]
    Signal,
    /// `E_mu` over decoy counts with the decoy source model.
    Decoy,
}

/// Upper bound on the single-photon error rate `t_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateBound {
    pub t1: f64,
    pub class: QberClass,
    /// The bound carries no information (`t_1 = 1/2`), either because the
    /// single-photon term vanished or because the raw value exceeded 1/2.
    pub vacuous: bool,
}

/// Vacuum counts are random bits.
const VACUUM_ERROR_RATE: f64 = 0.5;

/// Worst-case `t_1`: every error not explained by vacuum counts is blamed on
/// single photons,
/// `t_1 <= (E S - e_0 a_0^L S_0) / (a_1^L s_1)` with `e_0 = 1/2`.
///
/// `source` must be the model of the class named by `class`.
pub fn e1_upper(
    obs: &ObservedRates,
    source: &SourceModel,
    s1_lower: f64,
    class: QberClass,
) -> Result<ErrorRateBound> {
    obs.validate()?;
    if !(s1_lower.is_finite() && s1_lower >= 0.0) {
        return Err(domain(format!("s1_lower = {s1_lower} must be non-negative")));
    }
    let (qber, rate) = match class {
        QberClass::Signal => (obs.qber_signal, obs.s_mu_prime),
        QberClass::Decoy => (obs.qber_decoy, obs.s_mu),
    };
    let single = source.lo(1) * s1_lower;
    if single <= 0.0 {
        return Ok(ErrorRateBound { t1: VACUUM_ERROR_RATE, class, vacuous: true });
    }
    let numerator = (qber * rate - VACUUM_ERROR_RATE * source.lo(0) * obs.s0).max(0.0);
    let raw = numerator / single;
    Ok(if raw >= VACUUM_ERROR_RATE {
        ErrorRateBound { t1: VACUUM_ERROR_RATE, class, vacuous: true }
    } else {
        ErrorRateBound { t1: raw, class, vacuous: false }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::coherent_coefficients;

    fn poisson(mu: f64) -> PhotonDistribution {
        coherent_coefficients(mu, 10).unwrap()
    }

    // Reference values from an independent 30-digit evaluation of the same
    // closed forms on the 50 km observations.
    const NAIVE_S1_50KM: f64 = 6.645_296_471_330_761e-4;
    const NAIVE_T1_DECOY_50KM: f64 = 0.021_048_263_204_770_5;

    #[test]
    fn naive_bound_on_fifty_km_data() {
        let r = naive_s1_lower(&ObservedRates::FIFTY_KM, &poisson(0.2), &poisson(0.6)).unwrap();
        assert!((r.s1_lower - NAIVE_S1_50KM).abs() < 1e-15);
        assert!((r.delta1_prime_lower - 0.573_279_962_603_232).abs() < 1e-12);
        assert!((r.delta1_lower - 0.702_933_925_632_957).abs() < 1e-12);
        assert!(!r.clamped && r.condition_ok);
        let lambda = r.lambda_upper.unwrap();
        let a = poisson(0.2);
        let expected = 1.548e-4 - a.coefficient(0) * 2.609e-5 - a.coefficient(1) * NAIVE_S1_50KM;
        assert!((lambda - expected).abs() < 1e-18);
    }

    #[test]
    fn dead_channel_gives_zero() {
        let zero = ObservedRates { s0: 0.0, s_mu: 0.0, s_mu_prime: 0.0, qber_signal: 0.0, qber_decoy: 0.0 };
        let r = naive_s1_lower(&zero, &poisson(0.2), &poisson(0.6)).unwrap();
        assert_eq!(r.s1_lower, 0.0);
        assert_eq!(r.lambda_upper, Some(0.0));
        assert_eq!(r.delta1_prime_lower, 0.0);
    }

    #[test]
    fn zero_signal_rate_with_positive_bound_is_undefined() {
        let obs = ObservedRates { s0: 0.0, s_mu: 0.01, s_mu_prime: 0.0, qber_signal: 0.0, qber_decoy: 0.0 };
        assert!(matches!(
            naive_s1_lower(&obs, &poisson(0.2), &poisson(0.6)),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn swapped_sources_are_refused() {
        let obs = ObservedRates::FIFTY_KM;
        assert!(matches!(
            naive_s1_lower(&obs, &poisson(0.6), &poisson(0.2)),
            Err(Error::ConditionViolated { .. })
        ));
        let d = SourceModel::coherent(0.2, 0.0, 10).unwrap();
        let s = SourceModel::coherent(0.6, 0.0, 10).unwrap();
        assert!(matches!(robust_s1_lower(&obs, &s, &d), Err(Error::ConditionViolated { .. })));
    }

    #[test]
    fn naive_bound_reproduces_the_averaged_state_overestimate() {
        let averaged = poisson(0.0).mixture(&poisson(0.4), 0.5).unwrap();
        let eta: f64 = 1e-7;
        let obs = ObservedRates {
            s0: 0.0,
            s_mu: -(-0.4 * eta).exp_m1() / 2.0,
            s_mu_prime: -(-0.6 * eta).exp_m1() / 2.0,
            qber_signal: 0.0,
            qber_decoy: 0.0,
        };
        let r = naive_s1_lower(&obs, &averaged, &poisson(0.6)).unwrap();
        assert!((r.s1_lower / eta - 2.65336).abs() < 1e-4);
    }

    #[test]
    fn robust_bound_collapses_onto_naive_bound() {
        let d = SourceModel::coherent(0.2, 0.0, 10).unwrap();
        let s = SourceModel::coherent(0.6, 0.0, 10).unwrap();
        let robust = robust_s1_lower(&ObservedRates::FIFTY_KM, &d, &s).unwrap();
        assert!((robust.s1_lower - NAIVE_S1_50KM).abs() < 1e-15);
        assert_eq!(robust.lambda_upper, None);
    }

    #[test]
    fn five_percent_error_lowers_the_signal_fraction() {
        let obs = ObservedRates::FIFTY_KM;
        let exact = robust_s1_lower(
            &obs,
            &SourceModel::coherent(0.2, 0.0, 10).unwrap(),
            &SourceModel::coherent(0.6, 0.0, 10).unwrap(),
        )
        .unwrap();
        let wide = robust_s1_lower(
            &obs,
            &SourceModel::coherent(0.2, 0.05, 10).unwrap(),
            &SourceModel::coherent(0.6, 0.05, 10).unwrap(),
        )
        .unwrap();
        assert!((wide.s1_lower - 5.736_040_147_080_4e-4).abs() < 1e-15);
        assert!((wide.delta1_prime_lower - 0.484_414_376_140_478).abs() < 1e-12);
        assert!(wide.delta1_prime_lower < exact.delta1_prime_lower);
    }

    #[test]
    fn robust_bound_in_attack_regime_stays_below_truth() {
        let eta: f64 = 0.1;
        let obs = ObservedRates {
            s0: 0.0,
            s_mu: -(-0.4 * eta).exp_m1() / 2.0,
            s_mu_prime: -(-0.6 * eta).exp_m1() / 2.0,
            qber_signal: 0.0,
            qber_decoy: 0.0,
        };
        let decoy = SourceModel::coherent_interval(0.0, 0.4, 10).unwrap();
        let signal = SourceModel::coherent(0.6, 0.0, 10).unwrap();
        let r = robust_s1_lower(&obs, &decoy, &signal).unwrap();
        assert!((r.s1_lower - 0.042_504_081_210_736_87).abs() < 1e-12);
        assert!(r.s1_lower <= eta / 2.0);
    }

    #[test]
    fn decoy_error_rate_bound_on_fifty_km_data() {
        let model = SourceModel::coherent(0.2, 0.0, 10).unwrap();
        let t1 = e1_upper(&ObservedRates::FIFTY_KM, &model, NAIVE_S1_50KM, QberClass::Decoy).unwrap();
        assert!((t1.t1 - NAIVE_T1_DECOY_50KM).abs() < 1e-12);
        assert!(!t1.vacuous);
    }

    #[test]
    fn error_free_channel_gives_zero_error_rate() {
        let obs = ObservedRates { s0: 0.0, s_mu: 0.01, s_mu_prime: 0.02, qber_signal: 0.0, qber_decoy: 0.0 };
        let model = SourceModel::coherent(0.2, 0.0, 10).unwrap();
        let t1 = e1_upper(&obs, &model, 0.01, QberClass::Decoy).unwrap();
        assert_eq!(t1.t1, 0.0);
        assert!(!t1.vacuous);
    }

    #[test]
    fn error_rate_bound_clamps_and_flags() {
        let obs = ObservedRates { s0: 0.0, s_mu: 0.5, s_mu_prime: 0.5, qber_signal: 0.4, qber_decoy: 0.4 };
        let model = SourceModel::coherent(0.2, 0.0, 10).unwrap();
        let t1 = e1_upper(&obs, &model, 1e-3, QberClass::Decoy).unwrap();
        assert_eq!(t1.t1, 0.5);
        assert!(t1.vacuous);
        let zero = e1_upper(&obs, &model, 0.0, QberClass::Signal).unwrap();
        assert_eq!(zero.t1, 0.5);
        assert!(zero.vacuous);
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let mut obs = ObservedRates::FIFTY_KM;
        obs.qber_signal = 1.5;
        assert!(matches!(
            naive_s1_lower(&obs, &poisson(0.2), &poisson(0.6)),
            Err(Error::Domain(_))
        ));
    }
}
