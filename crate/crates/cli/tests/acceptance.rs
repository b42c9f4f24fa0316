//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_decoy::attack::{attack_closed_form, simulate, AttackScenario};
use robust_decoy::soundness::{run_soundness, SoundnessConfig};
use robust_decoy::{
    binary_entropy, check_robust_condition, coherent_coefficients, key_rate, naive_s1_lower, robust_s1_lower,
    ObservedRates, QberClass, SourceModel,
};
use robust_decoy_cli::report::Simulation;
use robust_decoy_cli::{emit_report, parse_config, run, Report, RunConfig, Status};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn shipped(name: &str) -> RunConfig {
    let dir = configs_dir();
    let mut cfg = parse_config(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    if let Some(file) = cfg.observed_file.as_mut() {
        *file = dir.join(&*file);
    }
    cfg
}

fn attack_closed_form_ratio() -> Check {
    let eta = 1e-9;
    let c = attack_closed_form(eta).map_err(|e| e.to_string())?;
    let naive = c.naive_s1_estimate / eta;
    let truth = c.true_s1_prime / eta;
    ensure(
        (naive - 2.65336).abs() <= 1e-4 && (truth - 0.5).abs() <= 1e-9,
        format!("naive/eta = {naive:.8}, true/eta = {truth:.10}"),
    )
}

fn attack_monte_carlo() -> Check {
    let scenario = AttackScenario::alternating(10_000_000, 100, 0.1, [0.2, 0.3, 0.5]);
    let ledger = simulate(&scenario, &scenario.alternating_channel(), 2024).map_err(|e| e.to_string())?;
    let closed = attack_closed_form(0.1).map_err(|e| e.to_string())?;
    let s1p_se = ledger.signal.by_photon[1].standard_error().unwrap_or(f64::NAN);
    let rows = [
        ("S_mu", ledger.observed.s_mu, closed.s_mu, ledger.s_mu_standard_error()),
        ("S_mu'", ledger.observed.s_mu_prime, closed.s_mu_prime, ledger.s_mu_prime_standard_error()),
        ("s1'", ledger.signal.sub_rate(1).unwrap_or(f64::NAN), closed.true_s1_prime, s1p_se),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, sim, expected, se) in rows {
        let z = (sim - expected) / se;
        ok &= z.abs() <= 3.0;
        detail.push(format!("{name} z={z:+.2}"));
    }
    ensure(ok, detail.join(", "))
}

fn soundness() -> Check {
    let summary = run_soundness(&SoundnessConfig::default(), 7).map_err(|e| e.to_string())?;
    ensure(
        summary.cases.len() >= 100 && summary.sampled_violations == 0 && summary.asymptotic_violations == 0,
        format!(
            "{} scenarios, violations sampled={} expected={}, min relative margin {:.4}",
            summary.cases.len(),
            summary.sampled_violations,
            summary.asymptotic_violations,
            summary.min_relative_margin_sampled.min(summary.min_relative_margin_asymptotic)
        ),
    )
}

fn reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut compared = 0;
    while compared < 1000 {
        let mu = rng.gen_range(0.02..0.6);
        let mu_prime = mu + rng.gen_range(0.05..1.5);
        let obs = ObservedRates {
            s0: rng.gen_range(0.0..1e-3),
            s_mu: rng.gen_range(1e-6..0.2),
            s_mu_prime: rng.gen_range(1e-6..0.3),
            qber_signal: 0.0,
            qber_decoy: 0.0,
        };
        let naive = naive_s1_lower(
            &obs,
            &coherent_coefficients(mu, 10).unwrap(),
            &coherent_coefficients(mu_prime, 10).unwrap(),
        );
        let robust = robust_s1_lower(
            &obs,
            &SourceModel::coherent(mu, 0.0, 10).unwrap(),
            &SourceModel::coherent(mu_prime, 0.0, 10).unwrap(),
        );
        match (naive, robust) {
            (Ok(n), Ok(r)) => {
                worst = worst
                    .max((n.s1_lower - r.s1_lower).abs())
                    .max((n.delta1_prime_lower - r.delta1_prime_lower).abs())
                    .max((n.delta1_lower - r.delta1_lower).abs());
                compared += 1;
            }
            (n, r) => return Err(format!("mu={mu} mu'={mu_prime}: naive {n:?}, robust {r:?}")),
        }
    }
    ensure(worst <= 1e-12, format!("{compared} inputs, max |difference| = {worst:.3e}"))
}

fn sweep_rates(report: &Report) -> Result<Vec<f64>, String> {
    let rows = report.keyrate.as_ref().and_then(|k| k.sweep.as_ref()).ok_or("no sweep in report")?;
    rows.iter()
        .map(|row| row.outcome.as_ref().map(|r| r.report.r_hz).map_err(|e| e.message.clone()))
        .collect()
}

fn table_anchor() -> Check {
    let cfg = shipped("sweep_50km.json");
    let references = cfg.sweep.reference_hz.clone().ok_or("config lacks reference_hz")?;
    let report = run(&cfg);
    if report.outcome.status != Status::Ok {
        return Err(format!("{:?}", report.outcome));
    }
    let rates = sweep_rates(&report)?;
    let residuals: Vec<f64> = rates.iter().zip(&references).map(|(p, r)| (p - r) / r).collect();
    let anchor = (rates[rates.len() - 1] - 136.3).abs() <= 1e-9;
    let within = residuals.iter().all(|r| r.abs() <= 0.15);
    let decreasing = rates.windows(2).all(|w| w[0] < w[1]);

    let mut decoy_cfg = cfg.clone();
    decoy_cfg.t1_source = QberClass::Decoy;
    let decoy = run(&decoy_cfg);
    let decoy_residuals = match sweep_rates(&decoy) {
        Ok(r) => r.iter().zip(&references).map(|(p, r)| format!("{:+.1}%", 100.0 * (p - r) / r)).collect::<Vec<_>>().join(" "),
        Err(e) => e,
    };
    ensure(
        anchor && within && decreasing,
        format!(
            "deltas {:?} -> Hz [{}], residuals [{}]; decoy-QBER t1 residuals (info) [{}]",
            cfg.sweep.deltas,
            rates.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(" "),
            residuals.iter().map(|r| format!("{:+.2}%", 100.0 * r)).collect::<Vec<_>>().join(" "),
            decoy_residuals
        ),
    )
}

fn condition_checks() -> Check {
    let decoy = SourceModel::coherent_interval(0.0, 0.4, 10).map_err(|e| e.to_string())?;
    let signal = SourceModel::coherent(0.6, 0.0, 10).map_err(|e| e.to_string())?;
    let forward = check_robust_condition(&decoy, &signal).map_err(|e| e.to_string())?;
    let swapped = check_robust_condition(&signal, &decoy).map_err(|e| e.to_string())?;
    let ratio = signal.lo(2) / decoy.hi(2);
    ensure(
        forward.holds && !swapped.holds && (ratio - 1.842).abs() < 5e-4,
        format!("a'2L/a2U = {ratio:.5}, attack regime holds={}, swapped holds={}", forward.holds, swapped.holds),
    )
}

fn entropy_and_key_rate() -> Check {
    let h = |x: f64| binary_entropy(x).unwrap();
    let mut asym = 0.0f64;
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        asym = asym.max((h(x) - h(1.0 - x)).abs());
    }
    let unit = key_rate(1.0, 0.0, 0.0, 1.0).unwrap().r_per_bit;
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.05).collect();
    let mut monotone = true;
    for &a in &grid {
        for &b in &grid {
            let r = |d: f64, t1: f64, t: f64| key_rate(d, t1, t, 1.16).unwrap().r_per_bit;
            let (d, t1, t) = (0.3 + a, b * 0.5, a * 0.2);
            monotone &= r(d + 0.01, t1, t) >= r(d, t1, t);
            monotone &= r(d, t1 + 0.01, t) <= r(d, t1, t);
            monotone &= r(d, t1, t + 0.01) <= r(d, t1, t);
        }
    }
    ensure(
        h(0.5) == 1.0 && asym <= 1e-12 && unit == 1.0 && monotone,
        format!("H(0.5) = {}, max |H(x)-H(1-x)| = {asym:.1e}, key_rate(1,0,0,1) = {unit}, monotone = {monotone}", h(0.5)),
    )
}

fn determinism() -> Check {
    let mut configs: Vec<RunConfig> =
        ["bound.json", "keyrate.json", "sweep_50km.json", "attack.json", "soundness.json"].iter().map(|n| shipped(n)).collect();
    configs[3].scenario.n_pulses = 2_000_000;
    configs[4].soundness.scenarios = 10;
    let mut checked = Vec::new();
    for cfg in configs {
        let once = || {
            let mut r = run(&cfg);
            r.meta.timestamp = None;
            emit_report(&r)
        };
        let (a, b) = (once(), once());
        if a != b {
            return Err(format!("{:?} reports differ", cfg.mode));
        }
        let report = run(&cfg);
        if report.outcome.status != Status::Ok {
            return Err(format!("{:?}: {:?}", cfg.mode, report.outcome));
        }
        if let Some(Simulation::Attack { counting_identity, .. }) = &report.simulation {
            if !counting_identity {
                return Err("counting identity failed".into());
            }
        }
        checked.push(format!("{:?}", cfg.mode).to_lowercase());
    }
    ensure(true, format!("identical reports for {}", checked.join(", ")))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 attack closed form", attack_closed_form_ratio),
        ("2 attack Monte Carlo", attack_monte_carlo),
        ("3 robust soundness", soundness),
        ("4 zero-width reduction", reduction),
        ("5 50 km key-rate row", table_anchor),
        ("6 condition checks", condition_checks),
        ("7 entropy and key rate", entropy_and_key_rate),
        ("8 determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.2}s)"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail} ({secs:.2}s)");
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
