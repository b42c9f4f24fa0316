//! Configuration, orchestration and report emission for the `robust-decoy` binary.
//!
//! A run is driven by a JSON [`config::RunConfig`] and always produces a JSON
//! [`report::Report`] with sections `inputs`, `conditions`, `bounds`, `keyrate`,
//! `simulation`, `outcome` and `meta`. Exit codes: 0 success, 2 configuration
//! error, 3 decoy-condition violation, 4 numerical failure, 5 I/O error.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_with_mode, ConfigError, Mode, RunConfig};
pub use report::{emit_report, parse_report, Report, Status};
pub use run::run;
