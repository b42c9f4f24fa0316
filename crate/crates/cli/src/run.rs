use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use robust_decoy::attack::{attack_closed_form, judge_attack, simulate, verify_counting_identity, RNG_ALGORITHM};
use robust_decoy::keyrate::{evaluate, evaluate_naive, RowErrorKind};
use robust_decoy::soundness::run_soundness;
use robust_decoy::{
    check_exact_condition, check_robust_condition, coherent_coefficients, sweep_delta, Error, ObservedRates,
};

use crate::config::{Mode, RunConfig};
use crate::report::{Bounds, Conditions, Inputs, KeyrateSection, Meta, Outcome, Report, Simulation, Status};

/// Why a run stopped early.
#[derive(Debug)]
struct Failure {
    status: Status,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::ConditionViolated { .. } | Error::CoefficientOrdering { .. } => Status::ConditionViolated,
            Error::Domain(_) | Error::Undefined(_) => Status::NumericalFailure,
        };
        Self { status, message: e.to_string() }
    }
}

/// Read observed rates from a `key,value` CSV, or from JSON when the file ends in `.json`.
pub fn read_observed(path: &Path) -> anyhow::Result<ObservedRates> {
    use anyhow::Context;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    parse_observed_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Two-column `key,value` records; an optional `key,value` header is skipped.
pub fn parse_observed_csv(text: &str) -> anyhow::Result<ObservedRates> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut fields: [Option<f64>; 5] = [None; 5];
    const KEYS: [&str; 5] = ["s0", "s_mu", "s_mu_prime", "qber_signal", "qber_decoy"];
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            anyhow::bail!("expected two columns, found {}", record.len());
        }
        let (key, value) = (&record[0], &record[1]);
        if key == "key" && value == "value" {
            continue;
        }
        let Some(slot) = KEYS.iter().position(|k| *k == key) else {
            anyhow::bail!("unknown key `{key}`");
        };
        if fields[slot].is_some() {
            anyhow::bail!("duplicate key `{key}`");
        }
        fields[slot] = Some(value.parse().map_err(|e| anyhow::anyhow!("`{key}`: {e}"))?);
    }
    let get = |i: usize| fields[i].ok_or_else(|| anyhow::anyhow!("missing key `{}`", KEYS[i]));
    let obs = ObservedRates { s0: get(0)?, s_mu: get(1)?, s_mu_prime: get(2)?, qber_signal: get(3)?, qber_decoy: get(4)? };
    obs.validate()?;
    Ok(obs)
}

fn now() -> Option<u64> {
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

/// Execute the configured pipeline. Always returns a report; its `outcome`
/// carries the exit status.
pub fn run(config: &RunConfig) -> Report {
    let mut report = Report {
        inputs: Inputs { config: config.clone(), observed: config.observed },
        conditions: None,
        bounds: None,
        keyrate: None,
        simulation: None,
        outcome: Outcome::new(Status::Ok, None),
        meta: Meta {
            tool: crate::report::TOOL.to_string(),
            version: crate::report::VERSION.to_string(),
            seed: config.seed,
            rng: RNG_ALGORITHM.to_string(),
            timestamp: now(),
        },
    };
    if let Err(f) = execute(config, &mut report) {
        report.outcome = Outcome::new(f.status, Some(f.message));
    }
    report
}

fn execute(config: &RunConfig, report: &mut Report) -> Result<(), Failure> {
    match config.mode {
        Mode::Bound | Mode::Keyrate | Mode::Sweep => {
            let obs = match (&config.observed, &config.observed_file) {
                (Some(obs), _) => *obs,
                (None, Some(path)) => read_observed(path)
                    .map_err(|e| Failure { status: Status::IoError, message: format!("{e:#}") })?,
                (None, None) => {
                    return Err(Failure { status: Status::ConfigError, message: "observed rates missing".into() })
                }
            };
            report.inputs.observed = Some(obs);
            match config.mode {
                Mode::Sweep => sweep(config, &obs, report),
                _ => bound_and_keyrate(config, &obs, report),
            }
        }
        Mode::Attack => attack(config, report),
        Mode::Soundness => soundness(config, report),
    }
}

fn bound_and_keyrate(config: &RunConfig, obs: &ObservedRates, report: &mut Report) -> Result<(), Failure> {
    let s = &config.sources;
    let sources = s.build(s.delta)?;
    let exact = check_exact_condition(&coherent_coefficients(s.mu, s.k_max)?, &coherent_coefficients(s.mu_prime, s.k_max)?)?;
    let robust = check_robust_condition(&sources.decoy, &sources.signal)?;
    report.conditions = Some(Conditions { delta: s.delta, exact, robust });
    robust.into_result()?;

    let naive = evaluate_naive(&sources, obs, &config.params, config.t1_source).ok().map(|r| r.bound);
    let result = evaluate(&sources, obs, &config.params, config.t1_source)?;
    report.bounds = Some(Bounds { robust: Some(result.bound), naive, error_rate: Some(result.error_rate) });

    if config.mode == Mode::Keyrate {
        let (params, calibrated) = calibrated_params(config, obs)?;
        let single = evaluate(&sources, obs, &params, config.t1_source)?;
        report.keyrate =
            Some(KeyrateSection { params, calibrated, single: Some(single), sweep: None, residuals: None });
    }
    Ok(())
}

/// Apply `calibrate_to_hz` by fitting the zero-error pipeline.
fn calibrated_params(
    config: &RunConfig,
    obs: &ObservedRates,
) -> Result<(robust_decoy::KeyRateParams, bool), Failure> {
    let Some(target) = config.calibrate_to_hz else {
        return Ok((config.params, false));
    };
    let anchor = evaluate(&config.sources.build(0.0)?, obs, &config.params, config.t1_source)?;
    let params = config.params.calibrated(target, anchor.report.r_per_bit, obs.s_mu_prime)?;
    Ok((params, true))
}

fn sweep(config: &RunConfig, obs: &ObservedRates, report: &mut Report) -> Result<(), Failure> {
    let s = &config.sources;
    let base = s.build(0.0)?;
    let exact = check_exact_condition(&coherent_coefficients(s.mu, s.k_max)?, &coherent_coefficients(s.mu_prime, s.k_max)?)?;
    let robust = check_robust_condition(&base.decoy, &base.signal)?;
    report.conditions = Some(Conditions { delta: 0.0, exact, robust });

    let (params, calibrated) = calibrated_params(config, obs)?;
    let rows = sweep_delta(&base, obs, &params, &config.sweep.deltas, config.t1_source);
    let residuals = config.sweep.reference_hz.as_ref().map(|refs| {
        rows.iter()
            .zip(refs)
            .map(|(row, &reference)| row.outcome.as_ref().ok().map(|r| (r.report.r_hz - reference) / reference))
            .collect()
    });
    let first_error = rows.iter().find_map(|r| r.outcome.as_ref().err().cloned());
    report.keyrate = Some(KeyrateSection { params, calibrated, single: None, sweep: Some(rows), residuals });
    match first_error {
        None => Ok(()),
        Some(e) => Err(Failure {
            status: match e.kind {
                RowErrorKind::ConditionViolated => Status::ConditionViolated,
                RowErrorKind::Domain => Status::ConfigError,
                RowErrorKind::Numerical => Status::NumericalFailure,
            },
            message: format!("sweep row failed: {}", e.message),
        }),
    }
}

fn attack(config: &RunConfig, report: &mut Report) -> Result<(), Failure> {
    let s = &config.sources;
    let (scenario, channel) = config.scenario.build([s.p0, s.p_mu, s.p_mu_prime])?;
    let closed_form = attack_closed_form(scenario.eta_e)?;
    let ledger = simulate(&scenario, &channel, config.seed)?;
    let counting_identity = verify_counting_identity(&ledger);
    let verdict = judge_attack(&scenario, &ledger)?;
    let (decoy, signal) = scenario.source_models(s.k_max)?;
    report.conditions = Some(Conditions {
        delta: 0.0,
        exact: check_exact_condition(
            &coherent_coefficients(scenario.mu, s.k_max)?,
            &coherent_coefficients(scenario.mu_prime, s.k_max)?,
        )?,
        robust: check_robust_condition(&decoy, &signal)?,
    });
    report.inputs.observed = Some(ledger.observed);
    report.simulation = Some(Simulation::Attack { closed_form, ledger: Box::new(ledger), counting_identity, verdict });
    if !counting_identity {
        return Err(Failure { status: Status::NumericalFailure, message: "ledger counting identity failed".into() });
    }
    if !verdict.robust_sound {
        return Err(Failure { status: Status::NumericalFailure, message: "robust bound exceeded ground truth".into() });
    }
    Ok(())
}

fn soundness(config: &RunConfig, report: &mut Report) -> Result<(), Failure> {
    let summary = run_soundness(&config.soundness, config.seed)?;
    let violations = summary.sampled_violations + summary.asymptotic_violations;
    report.simulation = Some(Simulation::Soundness(summary));
    if violations > 0 {
        return Err(Failure {
            status: Status::NumericalFailure,
            message: format!("{violations} soundness violations"),
        });
    }
    Ok(())
}

/// Short human-readable digest of a report.
pub fn summarize(report: &Report) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "mode: {:?}  status: {:?}", report.inputs.config.mode, report.outcome.status);
    if let Some(msg) = &report.outcome.message {
        let _ = writeln!(out, "message: {msg}");
    }
    if let Some(b) = &report.bounds {
        if let Some(r) = &b.robust {
            let _ = writeln!(
                out,
                "s1_lower = {:.6e}  delta1'_lower = {:.6}  delta1_lower = {:.6}{}",
                r.s1_lower,
                r.delta1_prime_lower,
                r.delta1_lower,
                if r.clamped { "  (clamped)" } else { "" }
            );
        }
        if let Some(t) = &b.error_rate {
            let _ = writeln!(out, "t1_upper = {:.6} ({:?} QBER){}", t.t1, t.class, if t.vacuous { "  (vacuous)" } else { "" });
        }
    }
    if let Some(k) = &report.keyrate {
        if let Some(single) = &k.single {
            let _ = writeln!(out, "R = {:.6} per bit, {:.2} Hz", single.report.r_per_bit, single.report.r_hz);
        }
        if let Some(rows) = &k.sweep {
            let _ = writeln!(out, "{:>8} {:>12} {:>10} {:>10} {:>10}", "delta", "R (Hz)", "delta1'", "t1", "residual");
            for (i, row) in rows.iter().enumerate() {
                let residual = k
                    .residuals
                    .as_ref()
                    .and_then(|r| r[i])
                    .map_or_else(|| "-".to_string(), |r| format!("{:+.2}%", 100.0 * r));
                match &row.outcome {
                    Ok(r) => {
                        let _ = writeln!(
                            out,
                            "{:>7.2}% {:>12.2} {:>10.6} {:>10.6} {:>10}",
                            100.0 * row.delta,
                            r.report.r_hz,
                            r.bound.delta1_prime_lower,
                            r.error_rate.t1,
                            residual
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(out, "{:>7.2}% error: {}", 100.0 * row.delta, e.message);
                    }
                }
            }
        }
    }
    match &report.simulation {
        Some(Simulation::Attack { closed_form, verdict, counting_identity, .. }) => {
            let _ = writeln!(
                out,
                "closed form: S_mu = {:.6}  S_mu' = {:.6}  true s1' = {:.6}  naive s1 = {:.6}",
                closed_form.s_mu, closed_form.s_mu_prime, closed_form.true_s1_prime, closed_form.naive_s1_estimate
            );
            let _ = writeln!(
                out,
                "simulated:   naive s1 = {:.6}  robust s1 = {:.6}  true s1' = {:.6}  true weight = {:.6}",
                verdict.naive_s1_estimate, verdict.robust_s1_lower, verdict.true_s1_prime, verdict.true_single_photon_weight
            );
            let _ = writeln!(
                out,
                "naive overestimates: {}  robust sound: {}  counting identity: {}",
                verdict.naive_overestimates, verdict.robust_sound, counting_identity
            );
        }
        Some(Simulation::Soundness(s)) => {
            let _ = writeln!(
                out,
                "{} scenarios: {} sampled / {} asymptotic violations; min relative margin {:.4} / {:.4}",
                s.cases.len(),
                s.sampled_violations,
                s.asymptotic_violations,
                s.min_relative_margin_sampled,
                s.min_relative_margin_asymptotic
            );
        }
        None => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_header() {
        let body = "s0,2.609e-5\ns_mu,1.548e-4\ns_mu_prime,3.817e-4\nqber_signal,0.04247\nqber_decoy,0.08379\n";
        assert_eq!(parse_observed_csv(body).unwrap(), ObservedRates::FIFTY_KM);
        let with_header = format!("key,value\n{body}");
        assert_eq!(parse_observed_csv(&with_header).unwrap(), ObservedRates::FIFTY_KM);
    }

    #[test]
    fn csv_errors_name_the_key() {
        let err = parse_observed_csv("s0,0.1\ns_mu,0.1\n").unwrap_err().to_string();
        assert!(err.contains("s_mu_prime"), "{err}");
        let err = parse_observed_csv("s0,0.1\nbogus,1\n").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = parse_observed_csv("s0,0.1\ns0,0.2\n").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }
}
