//! Photon-number statistics of phase-randomized (diagonal) sources.
//!
//! A source emits `sum_k a_k |k><k|`. When the intensity of each pulse is only
//! known to lie in an interval, every coefficient `a_k` is only known to lie in
//! `[a_k^L, a_k^U]`; [`SourceModel`] carries those bounds and the two condition
//! checks decide whether a decoy/signal pair can certify a single-photon bound.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_probability, Error, Result};

/// Truncation order used when callers do not pick one.
pub const DEFAULT_K_MAX: usize = 10;

const SUM_TOLERANCE: f64 = 1e-12;

/// Photon-number coefficients `a_0..=a_kmax` plus the mass that was truncated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    coefficients: Vec<f64>,
    tail_mass: f64,
}

impl PhotonDistribution {
    /// Poisson statistics of a phase-randomized coherent state of mean photon number `mu`.
    pub fn coherent(mu: f64, k_max: usize) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(domain(format!("intensity {mu} must be finite and non-negative")));
        }
        if k_max < 2 {
            return Err(domain(format!("k_max = {k_max} must be at least 2")));
        }
        let mut coefficients = Vec::with_capacity(k_max + 1);
        let mut term = (-mu).exp();
        coefficients.push(term);
        for k in 1..=k_max {
            term *= mu / k as f64;
            coefficients.push(term);
        }
        let tail_mass = (1.0 - coefficients.iter().sum::<f64>()).max(0.0);
        Ok(Self { coefficients, tail_mass })
    }

    /// Arbitrary diagonal state; the tail is whatever mass the list leaves out.
    pub fn from_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 3 {
            return Err(domain("at least a_0, a_1, a_2 are required"));
        }
        for (k, &a) in coefficients.iter().enumerate() {
            ensure_probability(&format!("a_{k}"), a)?;
        }
        let sum: f64 = coefficients.iter().sum();
        if sum > 1.0 + SUM_TOLERANCE {
            return Err(domain(format!("coefficients sum to {sum} > 1")));
        }
        Ok(Self { tail_mass: (1.0 - sum).max(0.0), coefficients })
    }

    /// Convex combination `weight * self + (1 - weight) * other`.
    ///
    /// This is the averaged state seen by someone who ignores which block a
    /// pulse came from.
    pub fn mixture(&self, other: &Self, weight: f64) -> Result<Self> {
        ensure_probability("mixture weight", weight)?;
        if self.k_max() != other.k_max() {
            return Err(domain("mixture of distributions with different k_max"));
        }
        let coefficients = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Self::from_coefficients(coefficients)
    }

    pub fn k_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `a_k`, or 0 beyond the truncation order.
    pub fn coefficient(&self, k: usize) -> f64 {
        self.coefficients.get(k).copied().unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }
}

/// Shorthand for [`PhotonDistribution::coherent`].
pub fn coherent_coefficients(mu: f64, k_max: usize) -> Result<PhotonDistribution> {
    PhotonDistribution::coherent(mu, k_max)
}

/// `mu^k e^{-mu} / k!`, evaluated in log space so large `k` does not overflow.
pub fn poisson_pmf(mu: f64, k: usize) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
    (k as f64 * mu.ln() - mu - log_fact).exp()
}

/// A source whose intensity is known to lie in `[intensity_lo, intensity_hi]`,
/// with per-photon-number coefficient bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub nominal_intensity: f64,
    pub intensity_lo: f64,
    pub intensity_hi: f64,
    pub coeff_lo: Vec<f64>,
    pub coeff_hi: Vec<f64>,
}

impl SourceModel {
    /// Coherent source with relative intensity error `delta`:
    /// `mu in [nominal (1 - delta), nominal (1 + delta)]`.
    pub fn coherent(nominal: f64, delta: f64, k_max: usize) -> Result<Self> {
        if !delta.is_finite() || !(0.0..1.0).contains(&delta) {
            return Err(domain(format!("relative error bound {delta} must lie in [0, 1)")));
        }
        if !nominal.is_finite() || nominal < 0.0 {
            return Err(domain(format!("intensity {nominal} must be finite and non-negative")));
        }
        let mut model = Self::coherent_interval(nominal * (1.0 - delta), nominal * (1.0 + delta), k_max)?;
        model.nominal_intensity = nominal;
        Ok(model)
    }

    /// Coherent source with an arbitrary intensity interval `[lo, hi]`.
    ///
    /// `a_k(mu)` rises up to `mu = k` and falls afterwards, so the extrema over
    /// the interval are at its endpoints or at the mode when the mode is inside.
    pub fn coherent_interval(lo: f64, hi: f64, k_max: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
            return Err(domain(format!("invalid intensity interval [{lo}, {hi}]")));
        }
        if k_max < 2 {
            return Err(domain(format!("k_max = {k_max} must be at least 2")));
        }
        let at_lo = PhotonDistribution::coherent(lo, k_max)?;
        let at_hi = PhotonDistribution::coherent(hi, k_max)?;
        let mut coeff_lo = Vec::with_capacity(k_max + 1);
        let mut coeff_hi = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let (a, b) = (at_lo.coefficient(k), at_hi.coefficient(k));
            let mut min = a.min(b);
            let mut max = a.max(b);
            let mode = k as f64;
            if lo < mode && mode < hi {
                let peak = poisson_pmf(mode, k);
                min = min.min(peak);
                max = max.max(peak);
            }
            coeff_lo.push(min);
            coeff_hi.push(max);
        }
        Ok(Self {
            nominal_intensity: 0.5 * (lo + hi),
            intensity_lo: lo,
            intensity_hi: hi,
            coeff_lo,
            coeff_hi,
        })
    }

    /// Zero-width model: the source is assumed to emit `dist` exactly.
    pub fn exact(dist: &PhotonDistribution, nominal: f64) -> Self {
        Self {
            nominal_intensity: nominal,
            intensity_lo: nominal,
            intensity_hi: nominal,
            coeff_lo: dist.coefficients().to_vec(),
            coeff_hi: dist.coefficients().to_vec(),
        }
    }

    /// User-supplied bounds for a non-Poissonian source.
    pub fn from_bounds(
        nominal: f64,
        intensity_lo: f64,
        intensity_hi: f64,
        coeff_lo: Vec<f64>,
        coeff_hi: Vec<f64>,
    ) -> Result<Self> {
        let model = Self { nominal_intensity: nominal, intensity_lo, intensity_hi, coeff_lo, coeff_hi };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, mu, hi) = (self.intensity_lo, self.nominal_intensity, self.intensity_hi);
        if !(0.0 <= lo && lo <= mu && mu <= hi && hi.is_finite()) {
            return Err(domain(format!("intensities must satisfy 0 <= {lo} <= {mu} <= {hi}")));
        }
        if self.coeff_lo.len() != self.coeff_hi.len() || self.coeff_lo.len() < 3 {
            return Err(domain("coefficient bound lists must have equal length >= 3"));
        }
        for (k, (&l, &h)) in self.coeff_lo.iter().zip(&self.coeff_hi).enumerate() {
            ensure_probability(&format!("a_{k}^L"), l)?;
            ensure_probability(&format!("a_{k}^U"), h)?;
            if l > h {
                return Err(domain(format!("a_{k}^L = {l} exceeds a_{k}^U = {h}")));
            }
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.coeff_lo.len() - 1
    }

    pub fn lo(&self, k: usize) -> f64 {
        self.coeff_lo.get(k).copied().unwrap_or(0.0)
    }

    pub fn hi(&self, k: usize) -> f64 {
        self.coeff_hi.get(k).copied().unwrap_or(0.0)
    }
}

/// Vacuum, decoy and signal sources together with their selection probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSources {
    pub vacuum: SourceModel,
    pub decoy: SourceModel,
    pub signal: SourceModel,
    pub p0: f64,
    pub p_mu: f64,
    pub p_mu_prime: f64,
}

impl ProtocolSources {
    /// Coherent decoy/signal pair sharing one relative error bound `delta`.
    pub fn coherent(
        mu: f64,
        mu_prime: f64,
        delta: f64,
        probabilities: [f64; 3],
        k_max: usize,
    ) -> Result<Self> {
        let [p0, p_mu, p_mu_prime] = probabilities;
        let sources = Self {
            vacuum: SourceModel::coherent(0.0, 0.0, k_max)?,
            decoy: SourceModel::coherent(mu, delta, k_max)?,
            signal: SourceModel::coherent(mu_prime, delta, k_max)?,
            p0,
            p_mu,
            p_mu_prime,
        };
        sources.validate()?;
        Ok(sources)
    }

    /// Same nominal intensities and probabilities, rebuilt for another `delta`.
    pub fn with_relative_error(&self, delta: f64) -> Result<Self> {
        let k_max = self.decoy.k_max();
        Self::coherent(
            self.decoy.nominal_intensity,
            self.signal.nominal_intensity,
            delta,
            [self.p0, self.p_mu, self.p_mu_prime],
            k_max,
        )
    }

    pub fn validate(&self) -> Result<()> {
        validate_probabilities(self.p0, self.p_mu, self.p_mu_prime)?;
        if self.vacuum.intensity_hi != 0.0 {
            return Err(domain("vacuum source must have zero intensity"));
        }
        if self.decoy.nominal_intensity >= self.signal.nominal_intensity {
            return Err(domain(format!(
                "decoy intensity {} must be below signal intensity {}",
                self.decoy.nominal_intensity, self.signal.nominal_intensity
            )));
        }
        self.decoy.validate()?;
        self.signal.validate()
    }
}

/// Class selection probabilities must be strictly positive and sum to one.
pub fn validate_probabilities(p0: f64, p_mu: f64, p_mu_prime: f64) -> Result<()> {
    for (name, p) in [("p0", p0), ("p_mu", p_mu), ("p_mu_prime", p_mu_prime)] {
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(domain(format!("{name} = {p} must lie in (0, 1)")));
        }
    }
    let sum = p0 + p_mu + p_mu_prime;
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(domain(format!("p0 + p_mu + p_mu_prime = {sum} must equal 1")));
    }
    Ok(())
}

/// Outcome of a decoy condition check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// First photon number at which the condition fails.
    pub violating_k: Option<usize>,
    /// Set when `a_2` (or `a_2^U`) is zero and the reference ratio is undefined.
    pub degenerate: bool,
}

impl ConditionCheck {
    fn pass() -> Self {
        Self { holds: true, violating_k: None, degenerate: false }
    }

    fn fail(k: usize) -> Self {
        Self { holds: false, violating_k: Some(k), degenerate: false }
    }

    fn degenerate() -> Self {
        Self { holds: false, violating_k: Some(2), degenerate: true }
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violating_k {
            Some(k) if !self.holds => Err(Error::ConditionViolated { k, degenerate: self.degenerate }),
            _ => Ok(self),
        }
    }
}

fn shared_k_max(a: usize, b: usize) -> Result<usize> {
    if a != b {
        return Err(domain(format!("decoy k_max {a} differs from signal k_max {b}")));
    }
    if a < 3 {
        return Err(domain(format!("condition checks need k_max >= 3, got {a}")));
    }
    Ok(a)
}

/// Exact-source condition: `a'_k / a_k > a'_2 / a_2` for every retained `k >= 3`.
pub fn check_exact_condition(
    decoy: &PhotonDistribution,
    signal: &PhotonDistribution,
) -> Result<ConditionCheck> {
    let k_max = shared_k_max(decoy.k_max(), signal.k_max())?;
    let a2 = decoy.coefficient(2);
    if a2 == 0.0 {
        return Ok(ConditionCheck::degenerate());
    }
    let reference = signal.coefficient(2) / a2;
    for k in 3..=k_max {
        let ak = decoy.coefficient(k);
        if ak == 0.0 {
            continue;
        }
        if signal.coefficient(k) / ak <= reference {
            return Ok(ConditionCheck::fail(k));
        }
    }
    Ok(ConditionCheck::pass())
}

/// Robust condition: `a'_k^L / a_k^U >= a'_2^L / a_2^U > 1` for every retained `k >= 3`.
pub fn check_robust_condition(decoy: &SourceModel, signal: &SourceModel) -> Result<ConditionCheck> {
    let k_max = shared_k_max(decoy.k_max(), signal.k_max())?;
    let a2_hi = decoy.hi(2);
    if a2_hi == 0.0 {
        return Ok(ConditionCheck::degenerate());
    }
    let reference = signal.lo(2) / a2_hi;
    if reference <= 1.0 {
        return Ok(ConditionCheck::fail(2));
    }
    for k in 3..=k_max {
        let ak_hi = decoy.hi(k);
        if ak_hi == 0.0 {
            continue;
        }
        if signal.lo(k) / ak_hi < reference {
            return Ok(ConditionCheck::fail(k));
        }
    }
    Ok(ConditionCheck::pass())
}
