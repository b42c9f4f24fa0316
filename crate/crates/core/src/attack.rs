//! Pulse-level simulation of correlated intensity errors and of an
//! eavesdropper who exploits them with a time-dependent channel.
//!
//! The protocol is split into `M` blocks. Within block `b` every decoy pulse has
//! intensity `mu * decoy_pattern[b]` and every signal pulse `mu' * signal_pattern[b]`.
//! The eavesdropper knows the pattern and acts per block: she either drops the
//! block or applies a linear loss of transmittance `eta`. A `k`-photon pulse
//! through transmittance `eta` clicks a threshold detector with probability
//! `1 - (1 - p_dark)(1 - eta)^k`.
//!
//! The ledger keeps the accounting over the photon-number sets `l_k` and the
//! detection weights
//!
//! ```text
//!   d_i = eta_i / (p_mu a_{k,i} + p_mu' a'_{k,i} [+ p_0 if k = 0])
//! ```
//!
//! where `eta_i` is 1 when pulse `i` clicked. Alongside the sampled ledger the
//! same quantities are evaluated in expectation ([`Asymptotic`]), which is the
//! regime in which the robust bound is a theorem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{naive_s1_lower, robust_s1_lower, ObservedRates};
use crate::error::{domain, ensure_probability, Result};
use crate::source::{poisson_pmf, validate_probabilities, PhotonDistribution, SourceModel, DEFAULT_K_MAX};

/// Identifier written into every ledger so that runs can be replayed.
pub const RNG_ALGORITHM: &str =
    "chacha8 (rand_chacha 0.3 ChaCha8Rng::seed_from_u64(seed), set_stream(block)); photon number by CDF inversion";

/// Decoy and signal intensities assumed in the alternating block attack.
pub const ATTACK_MU: f64 = 0.2;
pub const ATTACK_MU_PRIME: f64 = 0.6;

/// Below this many pulses the per-class counts are too small to be useful.
pub const MIN_RECOMMENDED_PULSES: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackScenario {
    pub n_pulses: u64,
    pub n_blocks: u64,
    /// Transmittance Eve applies to the blocks she keeps in the alternating attack.
    pub eta_e: f64,
    pub mu: f64,
    pub mu_prime: f64,
    /// Per-block multiplier on the decoy intensity.
    pub decoy_pattern: Vec<f64>,
    /// Per-block multiplier on the signal intensity.
    pub signal_pattern: Vec<f64>,
    pub p0: f64,
    pub p_mu: f64,
    pub p_mu_prime: f64,
    #[serde(default)]
    pub dark_count: f64,
}

impl AttackScenario {
    /// Alternating blocks: decoy pulses are vacuum in even blocks (`D_0`) and
    /// have twice the nominal intensity in odd blocks (`D_2`). Signal pulses are exact.
    pub fn alternating(n_pulses: u64, n_blocks: u64, eta_e: f64, probabilities: [f64; 3]) -> Self {
        let [p0, p_mu, p_mu_prime] = probabilities;
        Self {
            n_pulses,
            n_blocks,
            eta_e,
            mu: ATTACK_MU,
            mu_prime: ATTACK_MU_PRIME,
            decoy_pattern: (0..n_blocks).map(|b| if b % 2 == 0 { 0.0 } else { 2.0 }).collect(),
            signal_pattern: vec![1.0; n_blocks as usize],
            p0,
            p_mu,
            p_mu_prime,
            dark_count: 0.0,
        }
    }

    /// Every block at nominal intensity.
    pub fn exact(n_pulses: u64, n_blocks: u64, mu: f64, mu_prime: f64, probabilities: [f64; 3]) -> Self {
        let [p0, p_mu, p_mu_prime] = probabilities;
        Self {
            n_pulses,
            n_blocks,
            eta_e: 1.0,
            mu,
            mu_prime,
            decoy_pattern: vec![1.0; n_blocks as usize],
            signal_pattern: vec![1.0; n_blocks as usize],
            p0,
            p_mu,
            p_mu_prime,
            dark_count: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.n_pulses == 0 || self.n_pulses % self.n_blocks != 0 {
            return Err(domain(format!(
                "n_pulses = {} must be a positive multiple of n_blocks = {}",
                self.n_pulses, self.n_blocks
            )));
        }
        for (name, pattern) in [("decoy_pattern", &self.decoy_pattern), ("signal_pattern", &self.signal_pattern)] {
            if pattern.len() as u64 != self.n_blocks {
                return Err(domain(format!("{name} has {} entries, expected {}", pattern.len(), self.n_blocks)));
            }
            if let Some(m) = pattern.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
                return Err(domain(format!("{name} multiplier {m} must be finite and non-negative")));
            }
        }
        for (name, mu) in [("mu", self.mu), ("mu_prime", self.mu_prime)] {
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(domain(format!("{name} = {mu} must be finite and non-negative")));
            }
        }
        ensure_probability("eta_e", self.eta_e)?;
        ensure_probability("dark_count", self.dark_count)?;
        validate_probabilities(self.p0, self.p_mu, self.p_mu_prime)
    }

    pub fn block_len(&self) -> u64 {
        self.n_pulses / self.n_blocks
    }

    fn decoy_intensity(&self, block: usize) -> f64 {
        self.mu * self.decoy_pattern[block]
    }

    fn signal_intensity(&self, block: usize) -> f64 {
        self.mu_prime * self.signal_pattern[block]
    }

    /// Drop blocks with vacuum decoys, attenuate the rest by `eta_e`.
    pub fn alternating_channel(&self) -> Channel {
        Channel::PerBlock {
            actions: self
                .decoy_pattern
                .iter()
                .map(|&m| if m == 0.0 { BlockAction::Drop } else { BlockAction::Attenuate(self.eta_e) })
                .collect(),
        }
    }

    /// Coefficient bounds implied by the extreme multipliers of each pattern.
    pub fn source_models(&self, k_max: usize) -> Result<(SourceModel, SourceModel)> {
        Ok((
            pattern_model(self.mu, &self.decoy_pattern, k_max)?,
            pattern_model(self.mu_prime, &self.signal_pattern, k_max)?,
        ))
    }
}

fn pattern_model(nominal: f64, pattern: &[f64], k_max: usize) -> Result<SourceModel> {
    let lo = pattern.iter().copied().fold(f64::INFINITY, f64::min) * nominal;
    let hi = pattern.iter().copied().fold(f64::NEG_INFINITY, f64::max) * nominal;
    let mut model = SourceModel::coherent_interval(lo, hi, k_max)?;
    model.nominal_intensity = nominal.clamp(lo, hi);
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockAction {
    Drop,
    Attenuate(f64),
}

/// Eve's channel: pulse index -> block -> action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    /// Time-independent linear loss.
    Uniform { transmittance: f64 },
    PerBlock { actions: Vec<BlockAction> },
}

impl Channel {
    pub fn transmittance(&self, block: usize) -> f64 {
        match self {
            Channel::Uniform { transmittance } => *transmittance,
            Channel::PerBlock { actions } => match actions[block] {
                BlockAction::Drop => 0.0,
                BlockAction::Attenuate(eta) => eta,
            },
        }
    }

    fn validate(&self, n_blocks: u64) -> Result<()> {
        match self {
            Channel::Uniform { transmittance } => ensure_probability("transmittance", *transmittance),
            Channel::PerBlock { actions } => {
                if actions.len() as u64 != n_blocks {
                    return Err(domain(format!("channel has {} block actions, expected {n_blocks}", actions.len())));
                }
                for a in actions {
                    if let BlockAction::Attenuate(eta) = a {
                        ensure_probability("block transmittance", *eta)?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Pulses and clicks within one class (or one photon-number sub-class).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub pulses: u64,
    pub clicks: u64,
}

impl Tally {
    fn add(&mut self, other: &Tally) {
        self.pulses += other.pulses;
        self.clicks += other.clicks;
    }

    pub fn rate(&self) -> Option<f64> {
        (self.pulses > 0).then(|| self.clicks as f64 / self.pulses as f64)
    }

    /// Binomial standard error of [`Tally::rate`].
    pub fn standard_error(&self) -> Option<f64> {
        self.rate().map(|p| (p * (1.0 - p) / self.pulses as f64).sqrt())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassTally {
    pub total: Tally,
    /// Index `k` holds the `k`-photon sub-class.
    pub by_photon: Vec<Tally>,
}

impl ClassTally {
    fn record(&mut self, k: usize, click: bool) {
        if self.by_photon.len() <= k {
            self.by_photon.resize(k + 1, Tally::default());
        }
        let c = u64::from(click);
        self.total.pulses += 1;
        self.total.clicks += c;
        self.by_photon[k].pulses += 1;
        self.by_photon[k].clicks += c;
    }

    fn merge(&mut self, other: &ClassTally) {
        self.total.add(&other.total);
        if self.by_photon.len() < other.by_photon.len() {
            self.by_photon.resize(other.by_photon.len(), Tally::default());
        }
        for (mine, theirs) in self.by_photon.iter_mut().zip(&other.by_photon) {
            mine.add(theirs);
        }
    }

    /// Counting rate of the `k`-photon sub-class, if it is non-empty.
    pub fn sub_rate(&self, k: usize) -> Option<f64> {
        self.by_photon.get(k).and_then(Tally::rate)
    }
}

/// Accounting over the set `l_k` of pulses that carried `k` photons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhotonSet {
    pub size: u64,
    pub clicks: u64,
    /// `sum_{i in l_k} d_i`.
    pub weight_sum: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct BlockLedger {
    vacuum: ClassTally,
    decoy: ClassTally,
    signal: ClassTally,
    sets: Vec<PhotonSet>,
}

/// Quantities the protocol cannot observe but the simulator knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Counting rate of each decoy sub-class `y_k`.
    pub s_k: Vec<Option<f64>>,
    /// Counting rate of each signal sub-class `y'_k`.
    pub s_k_prime: Vec<Option<f64>>,
    /// `N^-1 sum_{i in l_1} d_i`, the quantity the robust bound certifies.
    pub single_photon_weight: f64,
    /// Fraction of signal counts caused by single-photon pulses.
    pub signal_single_photon_fraction: f64,
    /// Fraction of decoy counts caused by single-photon pulses.
    pub decoy_single_photon_fraction: f64,
}

/// Expected values of the same scenario and channel (infinite-`N` limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptotic {
    pub observed: ObservedRates,
    pub single_photon_weight: f64,
    pub signal_single_photon_fraction: f64,
    /// Single-photon counting rate of the signal class.
    pub s1_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLedger {
    pub rng: String,
    pub seed: u64,
    pub n_pulses: u64,
    pub vacuum: ClassTally,
    pub decoy: ClassTally,
    pub signal: ClassTally,
    /// Index `k` describes `l_k`.
    pub photon_sets: Vec<PhotonSet>,
    /// Simulated QBERs are zero: the simulator does not model bit values.
    pub observed: ObservedRates,
    pub truth: GroundTruth,
    pub asymptotic: Asymptotic,
    pub warnings: Vec<String>,
}

impl SimulationLedger {
    pub fn s_mu_standard_error(&self) -> f64 {
        self.decoy.total.standard_error().unwrap_or(0.0)
    }

    pub fn s_mu_prime_standard_error(&self) -> f64 {
        self.signal.total.standard_error().unwrap_or(0.0)
    }
}

/// Per-block photon-number coefficients of the two sources.
struct BlockStates {
    decoy: Vec<f64>,
    signal: Vec<f64>,
    decoy_mu: f64,
    signal_mu: f64,
}

impl BlockStates {
    const TABLE: usize = 32;

    fn new(decoy_mu: f64, signal_mu: f64) -> Self {
        let table = |mu: f64| (0..Self::TABLE).map(|k| poisson_pmf(mu, k)).collect();
        Self { decoy: table(decoy_mu), signal: table(signal_mu), decoy_mu, signal_mu }
    }

    fn coefficient(table: &[f64], mu: f64, k: usize) -> f64 {
        table.get(k).copied().unwrap_or_else(|| poisson_pmf(mu, k))
    }

    /// Probability mass that a pulse at this time lands in `l_k`, up to the
    /// factor `N`: the denominator of `d_i`.
    fn membership(&self, k: usize, p: &[f64; 3]) -> f64 {
        let a = Self::coefficient(&self.decoy, self.decoy_mu, k);
        let b = Self::coefficient(&self.signal, self.signal_mu, k);
        let vac = if k == 0 { p[0] } else { 0.0 };
        vac + p[1] * a + p[2] * b
    }
}

fn sample_poisson(rng: &mut ChaCha8Rng, mu: f64) -> usize {
    let u: f64 = rng.gen();
    if mu == 0.0 {
        return 0;
    }
    let mut k = 0;
    let mut p = (-mu).exp();
    let mut cdf = p;
    while u >= cdf {
        k += 1;
        p *= mu / k as f64;
        if p == 0.0 {
            break;
        }
        cdf += p;
    }
    k
}

fn click_probability(k: usize, eta: f64, dark: f64) -> f64 {
    1.0 - (1.0 - dark) * (1.0 - eta).powi(k as i32)
}

fn simulate_block(scenario: &AttackScenario, channel: &Channel, seed: u64, block: usize) -> BlockLedger {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    let p = [scenario.p0, scenario.p_mu, scenario.p_mu_prime];
    let states = BlockStates::new(scenario.decoy_intensity(block), scenario.signal_intensity(block));
    let eta = channel.transmittance(block);
    let mut ledger = BlockLedger::default();
    for _ in 0..scenario.block_len() {
        let u: f64 = rng.gen();
        let (class, mu) = if u < p[0] {
            (0, 0.0)
        } else if u < p[0] + p[1] {
            (1, states.decoy_mu)
        } else {
            (2, states.signal_mu)
        };
        let k = sample_poisson(&mut rng, mu);
        let click = rng.gen::<f64>() < click_probability(k, eta, scenario.dark_count);
        match class {
            0 => ledger.vacuum.record(k, click),
            1 => ledger.decoy.record(k, click),
            _ => ledger.signal.record(k, click),
        }
        if ledger.sets.len() <= k {
            ledger.sets.resize(k + 1, PhotonSet::default());
        }
        let set = &mut ledger.sets[k];
        set.size += 1;
        if click {
            set.clicks += 1;
            set.weight_sum += 1.0 / states.membership(k, &p);
        }
    }
    ledger
}

/// Expected rates for the scenario and channel, block by block.
pub fn asymptotic(scenario: &AttackScenario, channel: &Channel) -> Result<Asymptotic> {
    scenario.validate()?;
    channel.validate(scenario.n_blocks)?;
    let m = scenario.n_blocks as usize;
    let dark = scenario.dark_count;
    let (mut s0, mut s_mu, mut s_mu_prime, mut weight, mut single_signal) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for b in 0..m {
        let eta = channel.transmittance(b);
        let (mu, mu_prime) = (scenario.decoy_intensity(b), scenario.signal_intensity(b));
        let y1 = click_probability(1, eta, dark);
        s0 += dark;
        s_mu += 1.0 - (1.0 - dark) * (-eta * mu).exp();
        s_mu_prime += 1.0 - (1.0 - dark) * (-eta * mu_prime).exp();
        weight += y1;
        single_signal += poisson_pmf(mu_prime, 1) * y1;
    }
    let inv = 1.0 / m as f64;
    let observed = ObservedRates {
        s0: s0 * inv,
        s_mu: s_mu * inv,
        s_mu_prime: s_mu_prime * inv,
        qber_signal: 0.0,
        qber_decoy: 0.0,
    };
    let s1_prime_num: f64 =
        (0..m).map(|b| poisson_pmf(scenario.signal_intensity(b), 1) * click_probability(1, channel.transmittance(b), dark)).sum();
    let s1_prime_den: f64 = (0..m).map(|b| poisson_pmf(scenario.signal_intensity(b), 1)).sum();
    Ok(Asymptotic {
        observed,
        single_photon_weight: weight * inv,
        signal_single_photon_fraction: if s_mu_prime > 0.0 { single_signal / s_mu_prime } else { 0.0 },
        s1_prime: if s1_prime_den > 0.0 { s1_prime_num / s1_prime_den } else { 0.0 },
    })
}

fn single_fraction(class: &ClassTally) -> f64 {
    match (class.by_photon.get(1), class.total.clicks) {
        (Some(t), total) if total > 0 => t.clicks as f64 / total as f64,
        _ => 0.0,
    }
}

/// Run the scenario pulse by pulse. Deterministic in `seed`; blocks are
/// simulated in parallel on independent streams and merged in block order.
pub fn simulate(scenario: &AttackScenario, channel: &Channel, seed: u64) -> Result<SimulationLedger> {
    let asymptotic = asymptotic(scenario, channel)?;
    let mut warnings = Vec::new();
    if scenario.n_pulses < MIN_RECOMMENDED_PULSES {
        warnings.push(format!(
            "{} pulses is below the recommended minimum of {MIN_RECOMMENDED_PULSES}; per-class counts may be zero",
            scenario.n_pulses
        ));
    }
    let blocks: Vec<BlockLedger> = (0..scenario.n_blocks as usize)
        .into_par_iter()
        .map(|b| simulate_block(scenario, channel, seed, b))
        .collect();

    let mut total = BlockLedger::default();
    for block in &blocks {
        total.vacuum.merge(&block.vacuum);
        total.decoy.merge(&block.decoy);
        total.signal.merge(&block.signal);
        if total.sets.len() < block.sets.len() {
            total.sets.resize(block.sets.len(), PhotonSet::default());
        }
        for (mine, theirs) in total.sets.iter_mut().zip(&block.sets) {
            mine.size += theirs.size;
            mine.clicks += theirs.clicks;
            mine.weight_sum += theirs.weight_sum;
        }
    }

    let rate = |t: &Tally| t.rate().unwrap_or(0.0);
    let observed = ObservedRates {
        s0: rate(&total.vacuum.total),
        s_mu: rate(&total.decoy.total),
        s_mu_prime: rate(&total.signal.total),
        qber_signal: 0.0,
        qber_decoy: 0.0,
    };
    let n = scenario.n_pulses as f64;
    let truth = GroundTruth {
        s_k: (0..total.decoy.by_photon.len()).map(|k| total.decoy.sub_rate(k)).collect(),
        s_k_prime: (0..total.signal.by_photon.len()).map(|k| total.signal.sub_rate(k)).collect(),
        single_photon_weight: total.sets.get(1).map_or(0.0, |s| s.weight_sum / n),
        signal_single_photon_fraction: single_fraction(&total.signal),
        decoy_single_photon_fraction: single_fraction(&total.decoy),
    };
    Ok(SimulationLedger {
        rng: RNG_ALGORITHM.to_string(),
        seed,
        n_pulses: scenario.n_pulses,
        vacuum: total.vacuum,
        decoy: total.decoy,
        signal: total.signal,
        photon_sets: total.sets,
        observed,
        truth,
        asymptotic,
        warnings,
    })
}

/// Class counting rates recomputed from the photon-number tallies must equal
/// the directly tallied ones, and every pulse must sit in exactly one `l_k`.
pub fn verify_counting_identity(ledger: &SimulationLedger) -> bool {
    let classes = [&ledger.vacuum, &ledger.decoy, &ledger.signal];
    for class in classes {
        let pulses: u64 = class.by_photon.iter().map(|t| t.pulses).sum();
        let clicks: u64 = class.by_photon.iter().map(|t| t.clicks).sum();
        if pulses != class.total.pulses || clicks != class.total.clicks {
            return false;
        }
    }
    let recomputed = |c: &ClassTally| {
        let pulses: u64 = c.by_photon.iter().map(|t| t.pulses).sum();
        let clicks: u64 = c.by_photon.iter().map(|t| t.clicks).sum();
        if pulses == 0 { 0.0 } else { clicks as f64 / pulses as f64 }
    };
    if recomputed(&ledger.decoy) != ledger.observed.s_mu
        || recomputed(&ledger.signal) != ledger.observed.s_mu_prime
        || recomputed(&ledger.vacuum) != ledger.observed.s0
    {
        return false;
    }
    let set_total: u64 = ledger.photon_sets.iter().map(|s| s.size).sum();
    if set_total != ledger.n_pulses {
        return false;
    }
    ledger.photon_sets.iter().enumerate().all(|(k, set)| {
        let (pulses, clicks) = classes.iter().fold((0, 0), |(p, c), class| {
            let t = class.by_photon.get(k).copied().unwrap_or_default();
            (p + t.pulses, c + t.clicks)
        });
        pulses == set.size && clicks == set.clicks
    })
}

/// Closed-form rates of the block attack at `mu = 0.2`, `mu' = 0.6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackClosedForm {
    pub eta_e: f64,
    pub s_mu: f64,
    pub s_mu_prime: f64,
    pub true_s1_prime: f64,
    /// Exact-source bound applied to the block-averaged decoy state.
    pub naive_s1_estimate: f64,
}

/// Averaged decoy state seen when the block structure is ignored: half vacuum, half `2 mu`.
pub fn averaged_decoy_state(k_max: usize) -> Result<PhotonDistribution> {
    PhotonDistribution::coherent(0.0, k_max)?.mixture(&PhotonDistribution::coherent(2.0 * ATTACK_MU, k_max)?, 0.5)
}

pub fn attack_closed_form(eta_e: f64) -> Result<AttackClosedForm> {
    ensure_probability("eta_e", eta_e)?;
    let s_mu = -(-2.0 * eta_e * ATTACK_MU).exp_m1() / 2.0;
    let s_mu_prime = -(-eta_e * ATTACK_MU_PRIME).exp_m1() / 2.0;
    let obs = ObservedRates { s0: 0.0, s_mu, s_mu_prime, qber_signal: 0.0, qber_decoy: 0.0 };
    let naive = naive_s1_lower(
        &obs,
        &averaged_decoy_state(DEFAULT_K_MAX)?,
        &PhotonDistribution::coherent(ATTACK_MU_PRIME, DEFAULT_K_MAX)?,
    )?;
    Ok(AttackClosedForm { eta_e, s_mu, s_mu_prime, true_s1_prime: eta_e / 2.0, naive_s1_estimate: naive.s1_lower })
}

/// Side-by-side outcome of both bounds on one simulated attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackVerdict {
    pub naive_s1_estimate: f64,
    pub robust_s1_lower: f64,
    pub true_s1_prime: f64,
    pub true_single_photon_weight: f64,
    /// Exact-source bound exceeds the true signal single-photon rate.
    pub naive_overestimates: bool,
    /// Robust bound stays below both true single-photon quantities.
    pub robust_sound: bool,
}

/// Apply the averaged-state naive bound and the pattern-aware robust bound to a ledger.
pub fn judge_attack(scenario: &AttackScenario, ledger: &SimulationLedger) -> Result<AttackVerdict> {
    let k_max = DEFAULT_K_MAX;
    let m = scenario.n_blocks as usize;
    let mut avg = vec![0.0; k_max + 1];
    for b in 0..m {
        for (k, a) in avg.iter_mut().enumerate() {
            *a += poisson_pmf(scenario.decoy_intensity(b), k) / m as f64;
        }
    }
    let signal_dist = PhotonDistribution::coherent(scenario.mu_prime, k_max)?;
    let naive = naive_s1_lower(&ledger.observed, &PhotonDistribution::from_coefficients(avg)?, &signal_dist)?;
    let (decoy_model, signal_model) = scenario.source_models(k_max)?;
    let robust = robust_s1_lower(&ledger.observed, &decoy_model, &signal_model)?;
    let true_s1_prime = ledger.signal.sub_rate(1).unwrap_or(0.0);
    let weight = ledger.truth.single_photon_weight;
    Ok(AttackVerdict {
        naive_s1_estimate: naive.s1_lower,
        robust_s1_lower: robust.s1_lower,
        true_s1_prime,
        true_single_photon_weight: weight,
        naive_overestimates: naive.s1_lower > true_s1_prime,
        robust_sound: robust.s1_lower <= true_s1_prime && robust.s1_lower <= weight,
    })
}

/// Result of intensity monitoring with discard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<usize>,
    pub discard_fraction: f64,
    /// Bounds valid for every kept pulse.
    pub source: SourceModel,
}

/// Relative slack absorbing decimal-to-binary rounding of measured intensities.
const WINDOW_SLACK: f64 = 1e-12;

/// Keep pulses with `|mu_i - mu| / mu <= delta`; the kept set is then described
/// by a coherent model over the tolerance window.
pub fn filter_pulses(measured: &[f64], nominal: f64, delta: f64) -> Result<FilterOutcome> {
    if !(nominal.is_finite() && nominal > 0.0) {
        return Err(domain(format!("nominal intensity {nominal} must be positive")));
    }
    let source = SourceModel::coherent(nominal, delta, DEFAULT_K_MAX)?;
    let kept: Vec<usize> = measured
        .iter()
        .enumerate()
        .filter(|(_, &x)| (x - nominal).abs() <= nominal * delta * (1.0 + WINDOW_SLACK) + nominal * WINDOW_SLACK)
        .map(|(i, _)| i)
        .collect();
    let discard_fraction =
        if measured.is_empty() { 0.0 } else { 1.0 - kept.len() as f64 / measured.len() as f64 };
    Ok(FilterOutcome { kept, discard_fraction, source })
}
