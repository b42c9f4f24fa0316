use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robust_decoy_cli::config::{default_config, parse_config_with_mode, Mode};
use robust_decoy_cli::report::{Report, Status};
use robust_decoy_cli::run::summarize;
use robust_decoy_cli::{emit_report, run, RunConfig};

#[derive(Parser)]
#[command(name = "robust-decoy", version, about = "Decoy-state QKD bounds under inexact intensity control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify single-photon bounds from observed counting rates.
    Bound(Common),
    /// Bounds plus the final key rate.
    Keyrate(Common),
    /// Key rate over a list of relative intensity error bounds.
    Sweep(Common),
    /// Simulate the block attack on the exact-source bound.
    Attack(Common),
    /// Randomized soundness check of the robust bound.
    Soundness(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; defaults to the configured output, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the relative intensity error bound.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Suppress the human-readable summary.
    #[arg(long)]
    quiet: bool,
}

impl Command {
    fn split(self) -> (Mode, Common) {
        match self {
            Command::Bound(c) => (Mode::Bound, c),
            Command::Keyrate(c) => (Mode::Keyrate, c),
            Command::Sweep(c) => (Mode::Sweep, c),
            Command::Attack(c) => (Mode::Attack, c),
            Command::Soundness(c) => (Mode::Soundness, c),
        }
    }
}

fn load(mode: Mode, args: &Common) -> Result<RunConfig, (Status, String)> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| (Status::IoError, format!("reading {}: {e}", path.display())))?;
            let mut config = parse_config_with_mode(&text, Some(mode)).map_err(|e| (Status::ConfigError, e.to_string()))?;
            // Relative paths in a config file are relative to the file.
            if let (Some(file), Some(dir)) = (config.observed_file.as_mut(), path.parent()) {
                if file.is_relative() {
                    *file = dir.join(&*file);
                }
            }
            config
        }
        None => default_config(mode).map_err(|e| (Status::ConfigError, e.to_string()))?,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(delta) = args.delta {
        config.override_delta(delta).map_err(|e| (Status::ConfigError, e.to_string()))?;
    }
    Ok(config)
}

fn write_report(report: &Report, out: Option<&PathBuf>) -> std::io::Result<()> {
    let text = emit_report(report);
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = cli.command.split();
    let report = match load(mode, &args) {
        Ok(config) => run(&config),
        Err((status, message)) => {
            eprintln!("error: {message}");
            return ExitCode::from(status.exit_code() as u8);
        }
    };
    let out = args.out.clone().or_else(|| report.inputs.config.output.clone());
    if let Err(e) = write_report(&report, out.as_ref()) {
        eprintln!("error: writing report: {e}");
        return ExitCode::from(Status::IoError.exit_code() as u8);
    }
    if !args.quiet {
        let summary = summarize(&report);
        if out.is_some() {
            print!("{summary}");
        } else {
            eprint!("{summary}");
        }
    }
    ExitCode::from(report.outcome.exit_code as u8)
}
