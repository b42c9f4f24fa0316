use robust_decoy::attack::{AttackClosedForm, AttackVerdict, SimulationLedger};
use robust_decoy::keyrate::PipelineResult;
use robust_decoy::soundness::SoundnessSummary;
use robust_decoy::{BoundResult, ConditionCheck, ErrorRateBound, KeyRateParams, ObservedRates, SweepRow};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run consumed and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub inputs: Inputs,
    pub conditions: Option<Conditions>,
    pub bounds: Option<Bounds>,
    pub keyrate: Option<KeyrateSection>,
    pub simulation: Option<Simulation>,
    pub outcome: Outcome,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub config: RunConfig,
    /// Rates actually used, after reading `observed_file` if one was given.
    pub observed: Option<ObservedRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub delta: f64,
    /// Exact-source condition at the nominal intensities.
    pub exact: ConditionCheck,
    /// Interval condition at `delta`.
    pub robust: ConditionCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub robust: Option<BoundResult>,
    /// Exact-source bound at the nominal intensities, for comparison.
    pub naive: Option<BoundResult>,
    pub error_rate: Option<ErrorRateBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyrateSection {
    /// Parameters after calibration, if any.
    pub params: KeyRateParams,
    pub calibrated: bool,
    pub single: Option<PipelineResult>,
    pub sweep: Option<Vec<SweepRow>>,
    /// `(predicted - reference) / reference` per sweep row when references were given.
    pub residuals: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Simulation {
    Attack {
        closed_form: AttackClosedForm,
        ledger: Box<SimulationLedger>,
        counting_identity: bool,
        verdict: AttackVerdict,
    },
    Soundness(SoundnessSummary),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ConfigError,
    ConditionViolated,
    NumericalFailure,
    IoError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ConfigError => 2,
            Status::ConditionViolated => 3,
            Status::NumericalFailure => 4,
            Status::IoError => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: Status,
    pub exit_code: i32,
    pub message: Option<String>,
}

impl Outcome {
    pub fn new(status: Status, message: Option<String>) -> Self {
        Self { status, exit_code: status.exit_code(), message }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub rng: String,
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    pub timestamp: Option<u64>,
}

/// Pretty JSON; floats use the shortest representation that round-trips.
pub fn emit_report(report: &Report) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report contains only finite numbers");
    text.push('\n');
    text
}

pub fn parse_report(text: &str) -> serde_json::Result<Report> {
    serde_json::from_str(text)
}
