use proptest::prelude::*;
use robust_decoy::attack::{simulate, AttackScenario, Channel};
use robust_decoy::{coherent_coefficients, naive_s1_lower, robust_s1_lower, ObservedRates, SourceModel};

fn obs(s0: f64, s_mu: f64, s_mu_prime: f64) -> ObservedRates {
    ObservedRates { s0, s_mu, s_mu_prime, qber_signal: 0.0, qber_decoy: 0.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn zero_width_robust_bound_equals_naive_bound(
        mu in 0.02f64..0.6,
        gap in 0.05f64..1.5,
        s0 in 0.0f64..1e-3,
        s_mu in 1e-6f64..0.2,
        s_mu_prime in 1e-6f64..0.3,
    ) {
        let mu_prime = mu + gap;
        let observed = obs(s0, s_mu, s_mu_prime);
        let naive = naive_s1_lower(
            &observed,
            &coherent_coefficients(mu, 10).unwrap(),
            &coherent_coefficients(mu_prime, 10).unwrap(),
        );
        let robust = robust_s1_lower(
            &observed,
            &SourceModel::coherent(mu, 0.0, 10).unwrap(),
            &SourceModel::coherent(mu_prime, 0.0, 10).unwrap(),
        );
        match (naive, robust) {
            (Ok(n), Ok(r)) => {
                prop_assert!((n.s1_lower - r.s1_lower).abs() < 1e-12);
                prop_assert!((n.delta1_prime_lower - r.delta1_prime_lower).abs() < 1e-12);
                prop_assert!((n.delta1_lower - r.delta1_lower).abs() < 1e-12);
            }
            // The robust condition additionally demands a'_2 / a_2 > 1.
            (Ok(_), Err(_)) => prop_assert!(coherent_coefficients(mu_prime, 2).unwrap().coefficient(2)
                <= coherent_coefficients(mu, 2).unwrap().coefficient(2)),
            (n, r) => prop_assert!(false, "naive {:?} robust {:?}", n, r),
        }
    }

    #[test]
    fn widening_the_interval_never_improves_the_bound(
        s0 in 0.0f64..1e-4,
        s_mu in 1e-4f64..0.05,
        ratio in 1.2f64..3.0,
    ) {
        let observed = obs(s0, s_mu, (s_mu * ratio).min(1.0));
        let mut previous = f64::INFINITY;
        for i in 0..=40 {
            let delta = i as f64 * 0.005;
            let r = robust_s1_lower(
                &observed,
                &SourceModel::coherent(0.2, delta, 10).unwrap(),
                &SourceModel::coherent(0.6, delta, 10).unwrap(),
            )
            .unwrap();
            prop_assert!(r.s1_lower <= previous + 1e-18);
            previous = r.s1_lower;
        }
    }
}

#[test]
fn fifty_km_bound_is_monotone_on_a_delta_grid() {
    let mut previous = f64::INFINITY;
    for i in 0..=20 {
        let delta = i as f64 * 0.01;
        let r = robust_s1_lower(
            &ObservedRates::FIFTY_KM,
            &SourceModel::coherent(0.2, delta, 10).unwrap(),
            &SourceModel::coherent(0.6, delta, 10).unwrap(),
        )
        .unwrap();
        assert!(r.s1_lower <= previous);
        previous = r.s1_lower;
    }
}

#[test]
fn exact_source_naive_bound_is_sound_under_a_static_channel() {
    let probs = [0.2, 0.3, 0.5];
    for (seed, eta) in [(1u64, 0.05), (2, 0.3), (3, 0.9)] {
        let scenario = AttackScenario::exact(2_000_000, 20, 0.2, 0.6, probs);
        let ledger = simulate(&scenario, &Channel::Uniform { transmittance: eta }, seed).unwrap();
        let (a, b) = (coherent_coefficients(0.2, 10).unwrap(), coherent_coefficients(0.6, 10).unwrap());
        let naive = naive_s1_lower(&ledger.observed, &a, &b).unwrap();
        let den = b.coefficient(2) * a.coefficient(1) - b.coefficient(1) * a.coefficient(2);
        let se = ((b.coefficient(2) / den * ledger.s_mu_standard_error()).powi(2)
            + (a.coefficient(2) / den * ledger.s_mu_prime_standard_error()).powi(2))
        .sqrt();
        let true_s1 = ledger.decoy.sub_rate(1).unwrap();
        assert!(naive.s1_lower <= true_s1 + 3.0 * se, "eta={eta}: {} vs {true_s1} (se {se})", naive.s1_lower);
        // Static channel: s1 = eta exactly in expectation.
        assert!((true_s1 - eta).abs() < 4.0 * ledger.decoy.by_photon[1].standard_error().unwrap());
    }
}
