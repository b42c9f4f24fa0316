use std::path::PathBuf;

use robust_decoy::attack::{AttackScenario, Channel, ATTACK_MU, ATTACK_MU_PRIME};
use robust_decoy::soundness::SoundnessConfig;
use robust_decoy::{KeyRateParams, ObservedRates, ProtocolSources, QberClass, DEFAULT_K_MAX};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which pipeline a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bound,
    Keyrate,
    Sweep,
    Attack,
    Soundness,
}

impl Mode {
    fn needs_observations(self) -> bool {
        matches!(self, Mode::Bound | Mode::Keyrate | Mode::Sweep)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration document: {0}")]
    Parse(String),
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesConfig {
    pub mu: f64,
    pub mu_prime: f64,
    /// Relative intensity error bound applied to both decoy and signal.
    pub delta: f64,
    pub p0: f64,
    pub p_mu: f64,
    pub p_mu_prime: f64,
    pub k_max: usize,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        Self { mu: 0.2, mu_prime: 0.6, delta: 0.0, p0: 0.1, p_mu: 0.1, p_mu_prime: 0.8, k_max: DEFAULT_K_MAX }
    }
}

impl SourcesConfig {
    pub fn build(&self, delta: f64) -> robust_decoy::Result<ProtocolSources> {
        ProtocolSources::coherent(self.mu, self.mu_prime, delta, [self.p0, self.p_mu, self.p_mu_prime], self.k_max)
    }
}

fn default_sweep_deltas() -> Vec<f64> {
    vec![0.05, 0.04, 0.03, 0.02, 0.01, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_sweep_deltas")]
    pub deltas: Vec<f64>,
    /// Optional published rates (Hz), one per delta, for residual reporting.
    #[serde(default)]
    pub reference_hz: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { deltas: default_sweep_deltas(), reference_hz: None }
    }
}

/// Intensity error pattern over blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternConfig {
    /// Decoys vacuum in even blocks, doubled in odd blocks; Eve drops the former.
    Alternating,
    /// No intensity error, time-independent channel of transmittance `eta_e`.
    Exact,
    /// Explicit per-block multipliers and channel.
    Custom { decoy: Vec<f64>, signal: Vec<f64>, channel: Channel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_pulses: u64,
    pub n_blocks: u64,
    pub eta_e: f64,
    pub mu: f64,
    pub mu_prime: f64,
    pub pattern: PatternConfig,
    pub dark_count: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_pulses: 10_000_000,
            n_blocks: 100,
            eta_e: 0.1,
            mu: ATTACK_MU,
            mu_prime: ATTACK_MU_PRIME,
            pattern: PatternConfig::Alternating,
            dark_count: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn build(&self, probabilities: [f64; 3]) -> robust_decoy::Result<(AttackScenario, Channel)> {
        let mut scenario = AttackScenario::alternating(self.n_pulses, self.n_blocks, self.eta_e, probabilities);
        scenario.mu = self.mu;
        scenario.mu_prime = self.mu_prime;
        scenario.dark_count = self.dark_count;
        let channel = match &self.pattern {
            PatternConfig::Alternating => scenario.alternating_channel(),
            PatternConfig::Exact => {
                scenario.decoy_pattern = vec![1.0; self.n_blocks as usize];
                Channel::Uniform { transmittance: self.eta_e }
            }
            PatternConfig::Custom { decoy, signal, channel } => {
                scenario.decoy_pattern = decoy.clone();
                scenario.signal_pattern = signal.clone();
                channel.clone()
            }
        };
        scenario.validate()?;
        Ok((scenario, channel))
    }
}

/// Fully materialized run configuration: every default is explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub sources: SourcesConfig,
    pub observed: Option<ObservedRates>,
    /// Two-column `key,value` CSV (or a JSON object) with the observed rates.
    pub observed_file: Option<PathBuf>,
    pub params: KeyRateParams,
    /// Fit `params.sift_factor` so that the zero-error pipeline yields this rate.
    pub calibrate_to_hz: Option<f64>,
    pub t1_source: QberClass,
    pub sweep: SweepConfig,
    pub scenario: ScenarioConfig,
    pub soundness: SoundnessConfig,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// On-disk form: everything optional except what the mode demands.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    #[serde(default)]
    sources: SourcesConfig,
    observed: Option<ObservedRates>,
    observed_file: Option<PathBuf>,
    #[serde(default)]
    params: KeyRateParams,
    calibrate_to_hz: Option<f64>,
    #[serde(default)]
    t1_source: QberClass,
    #[serde(default)]
    sweep: SweepConfig,
    #[serde(default)]
    scenario: ScenarioConfig,
    #[serde(default)]
    soundness: SoundnessConfig,
    #[serde(default)]
    seed: u64,
    output: Option<PathBuf>,
}

/// Parse and validate a JSON configuration that names its own `mode`.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_mode(text, None)
}

/// Like [`parse_config`], with the mode supplied by the caller (e.g. a CLI
/// subcommand). A mode in the document must agree with it.
pub fn parse_config_with_mode(text: &str, mode: Option<Mode>) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mode = match (raw.mode, mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(invalid("mode", format!("document says {a:?} but {b:?} was requested")))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(invalid("mode", "required")),
    };
    let config = RunConfig {
        mode,
        sources: raw.sources,
        observed: raw.observed,
        observed_file: raw.observed_file,
        params: raw.params,
        calibrate_to_hz: raw.calibrate_to_hz,
        t1_source: raw.t1_source,
        sweep: raw.sweep,
        scenario: raw.scenario,
        soundness: raw.soundness,
        seed: raw.seed,
        output: raw.output,
    };
    config.validate()?;
    Ok(config)
}

/// Defaults for `mode` with no document at all.
pub fn default_config(mode: Mode) -> Result<RunConfig, ConfigError> {
    parse_config_with_mode("{}", Some(mode))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sources;
        let sum = s.p0 + s.p_mu + s.p_mu_prime;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid("sources.p0 + sources.p_mu + sources.p_mu_prime", format!("sum is {sum}, must equal 1")));
        }
        if s.k_max < 3 {
            return Err(invalid("sources.k_max", "must be at least 3 for the condition checks"));
        }
        if !(0.0..1.0).contains(&s.delta) {
            return Err(invalid("sources.delta", format!("{} must lie in [0, 1)", s.delta)));
        }
        s.build(s.delta).map_err(|e| invalid("sources", e))?;

        if self.mode.needs_observations() {
            match (&self.observed, &self.observed_file) {
                (Some(_), Some(_)) => return Err(invalid("observed", "give either `observed` or `observed_file`, not both")),
                (None, None) => return Err(invalid("observed", format!("required in {:?} mode", self.mode))),
                (Some(obs), None) => obs.validate().map_err(|e| invalid("observed", e))?,
                (None, Some(_)) => {}
            }
        }
        self.params.validate().map_err(|e| invalid("params", e))?;
        if let Some(hz) = self.calibrate_to_hz {
            if !(hz.is_finite() && hz >= 0.0) {
                return Err(invalid("calibrate_to_hz", "must be a non-negative rate"));
            }
        }
        if self.sweep.deltas.is_empty() {
            return Err(invalid("sweep.deltas", "must not be empty"));
        }
        if let Some(d) = self.sweep.deltas.iter().find(|d| !d.is_finite()) {
            return Err(invalid("sweep.deltas", format!("{d} is not finite")));
        }
        if let Some(r) = &self.sweep.reference_hz {
            if r.len() != self.sweep.deltas.len() {
                return Err(invalid("sweep.reference_hz", "must have one entry per delta"));
            }
        }
        if self.mode == Mode::Attack {
            self.scenario.build([s.p0, s.p_mu, s.p_mu_prime]).map_err(|e| invalid("scenario", e))?;
        }
        if self.mode == Mode::Soundness {
            let c = &self.soundness;
            if c.scenarios == 0 {
                return Err(invalid("soundness.scenarios", "must be positive"));
            }
            if c.deltas.is_empty() || c.deltas.iter().any(|d| !(0.0..1.0).contains(d)) {
                return Err(invalid("soundness.deltas", "must be non-empty and lie in [0, 1)"));
            }
            if c.n_blocks == 0 || c.n_pulses % c.n_blocks != 0 {
                return Err(invalid("soundness.n_pulses", "must be a positive multiple of soundness.n_blocks"));
            }
            let [p0, p1, p2] = c.probabilities;
            robust_decoy::source::validate_probabilities(p0, p1, p2)
                .map_err(|e| invalid("soundness.probabilities", e))?;
            if !(0.0..=1.0).contains(&c.drop_probability) {
                return Err(invalid("soundness.drop_probability", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Apply a `--delta` override to whichever field the mode consumes.
    pub fn override_delta(&mut self, delta: f64) -> Result<(), ConfigError> {
        match self.mode {
            Mode::Bound | Mode::Keyrate => self.sources.delta = delta,
            Mode::Sweep => {
                self.sweep.deltas = vec![delta];
                self.sweep.reference_hz = None;
            }
            Mode::Soundness => self.soundness.deltas = vec![delta],
            Mode::Attack => return Err(invalid("--delta", "has no meaning in attack mode")),
        }
        self.validate()
    }
}
