mod common;

use common::{animals1, rel_err, DenseOracle};
use pdxpow_core::datagen::gen_anova;
use pdxpow_core::lmm::{fit_lmm_with, RemlProfile, THETA_MAX};
use pdxpow_core::rng::{replicate_stream, seeded_stream};
use pdxpow_core::{fit_lmm, wald_test_lmm, AnovaParams, Dataset, Record, WaldReference};
use proptest::prelude::*;

fn balanced_sample(n: usize, m: usize, tau2: f64, seed: u64) -> Dataset {
    let p = AnovaParams::new(1.0, 0.6, tau2, 0.5).unwrap();
    gen_anova(n, m, &p, &mut seeded_stream(seed))
}

#[test]
fn animals1_reproduces_pilot_estimates() {
    let fit = fit_lmm(&animals1().to_dataset()).unwrap();
    assert!(fit.converged);
    assert!(rel_err(fit.beta_hat, 0.7299) < 0.01, "{fit:?}");
    assert!(rel_err(fit.tau2_hat, 0.0332) < 0.01, "{fit:?}");
    assert!(rel_err(fit.sigma2_hat, 0.386) < 0.01, "{fit:?}");
    assert_eq!(fit.df, 14.0);
}

#[test]
fn reml_matches_dense_grid_search() {
    for (seed, tau2) in [(1, 0.4), (2, 0.05), (3, 1.5)] {
        let d = balanced_sample(5, 3, tau2, seed);
        let fit = fit_lmm(&d).unwrap();
        let oracle = DenseOracle::new(&d);
        let (lo, hi) = (1e-8f64.ln(), 1e6f64.ln());
        let (mut best_theta, mut best) = (0.0, oracle.profile(0.0));
        for i in 0..10_000 {
            let theta = (lo + (hi - lo) * i as f64 / 9_999.0).exp();
            let cand = oracle.profile(theta);
            if cand.2 > best.2 {
                best = cand;
                best_theta = theta;
            }
        }
        assert!((fit.beta_hat - best.0).abs() < 1e-6, "seed {seed}");
        // The grid optimum can only be worse than the continuous one.
        assert!(
            fit.log_restricted_likelihood >= best.2 - 1e-9,
            "seed {seed}"
        );
        assert!((fit.log_restricted_likelihood - best.2).abs() < 1e-4);
        assert!(
            (fit.theta.max(1e-8).ln() - best_theta.max(1e-8).ln()).abs() < 0.05 || fit.theta < 1e-6
        );
        // The closed-form profile and the dense one agree pointwise.
        let profile = RemlProfile::new(&d).unwrap();
        for theta in [0.0, 0.01, 0.7, 30.0] {
            let a = profile.eval(theta);
            let b = oracle.profile(theta);
            assert!(
                (a.beta - b.0).abs() < 1e-10
                    && (a.sigma2 - b.1).abs() < 1e-10
                    && (a.loglik - b.2).abs() < 1e-9
            );
        }
    }
}

#[test]
fn unbalanced_profile_matches_dense_oracle() {
    let mut d = balanced_sample(4, 3, 0.3, 9);
    d.records
        .retain(|r| !(r.line == 1 && r.treated) || r.y > 2.0);
    d.records.truncate(d.records.len() - 1);
    let profile = RemlProfile::new(&d).unwrap();
    let oracle = DenseOracle::new(&d);
    for theta in [0.0, 0.2, 5.0] {
        let a = profile.eval(theta);
        let b = oracle.profile(theta);
        assert!((a.beta - b.0).abs() < 1e-10);
        assert!((a.loglik - b.2).abs() < 1e-9);
    }
}

#[test]
fn balanced_fit_matches_expected_mean_squares() {
    let (n, m) = (6, 4);
    let mut checked = 0;
    for seed in 0..20 {
        let d = balanced_sample(n, m, 0.4, 100 + seed);
        let ly: Vec<(usize, bool, f64)> = d
            .records
            .iter()
            .map(|r| (r.line, r.treated, r.y.ln()))
            .collect();
        let grand = ly.iter().map(|v| v.2).sum::<f64>() / ly.len() as f64;
        let line_mean = |i: usize| {
            let v: Vec<f64> = ly.iter().filter(|r| r.0 == i).map(|r| r.2).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let arm_mean = |t: bool| {
            let v: Vec<f64> = ly.iter().filter(|r| r.1 == t).map(|r| r.2).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let msl = 2.0 * m as f64 * (0..n).map(|i| (line_mean(i) - grand).powi(2)).sum::<f64>()
            / (n - 1) as f64;
        let sse: f64 = ly
            .iter()
            .map(|&(i, t, y)| (y - line_mean(i) - arm_mean(t) + grand).powi(2))
            .sum();
        let mse = sse / (2 * n * m - n - 1) as f64;
        let tau2 = (msl - mse) / (2.0 * m as f64);
        if tau2 <= 0.0 {
            continue;
        }
        let fit = fit_lmm(&d).unwrap();
        assert!(
            (fit.sigma2_hat - mse).abs() < 1e-6,
            "seed {seed}: {} vs {mse}",
            fit.sigma2_hat
        );
        assert!(
            (fit.tau2_hat - tau2).abs() < 1e-6,
            "seed {seed}: {} vs {tau2}",
            fit.tau2_hat
        );
        checked += 1;
    }
    assert!(checked >= 15);
}

#[test]
fn simulated_null_holds_level() {
    let p = AnovaParams::new(5.0, 0.0, 0.2, 0.5).unwrap();
    let reps = 2000;
    let rejected = (0..reps)
        .filter(|&r| {
            let d = gen_anova(5, 5, &p, &mut replicate_stream(42, 5, 5, r));
            let fit = fit_lmm(&d).unwrap();
            wald_test_lmm(&fit, 0.05).unwrap()
        })
        .count();
    let rate = rejected as f64 / reps as f64;
    assert!((rate - 0.05).abs() <= 0.015, "rejection rate {rate}");
}

#[test]
fn z_reference_is_available() {
    let d = animals1().to_dataset();
    let t = fit_lmm(&d).unwrap();
    let z = fit_lmm_with(&d, WaldReference::Normal).unwrap();
    assert_eq!(t.beta_hat, z.beta_hat);
    assert!(z.p_value < t.p_value);
}

#[test]
fn upper_edge_is_not_converged() {
    // No within-line residual variation besides the treatment shift.
    let mut records = Vec::new();
    for (line, base) in [0.5f64, 2.0, 7.0].iter().enumerate() {
        for treated in [false, false, true, true] {
            let y = base * if treated { 2.0 } else { 1.0 };
            records.push(Record {
                line,
                treated,
                y,
                event: true,
            });
        }
    }
    let d = Dataset {
        n_lines: 3,
        records,
    };
    let fit = fit_lmm(&d).unwrap();
    assert!(!fit.converged || fit.theta < THETA_MAX * 0.999);
    if !fit.converged {
        assert!(wald_test_lmm(&fit, 0.05).is_err());
    }
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (
        2usize..7,
        1usize..5,
        0.0f64..1.5,
        0.05f64..2.0,
        any::<u64>(),
    )
        .prop_map(|(n, m, tau2, sigma2, seed)| {
            let p = AnovaParams::new(0.3, 0.4, tau2, sigma2).unwrap();
            gen_anova(n, m, &p, &mut seeded_stream(seed))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reml_optimum_beats_both_edges(d in arb_dataset().prop_filter("needs df", |d| d.len() > d.n_lines + 2)) {
        let fit = fit_lmm(&d).unwrap();
        let profile = RemlProfile::new(&d).unwrap();
        prop_assert!(fit.log_restricted_likelihood >= profile.eval(0.0).loglik - 1e-8);
        prop_assert!(fit.log_restricted_likelihood >= profile.eval(THETA_MAX).loglik - 1e-8);
    }

    #[test]
    fn outcome_scale_equivariance(d in arb_dataset().prop_filter("needs df", |d| d.len() > d.n_lines + 2), c in 0.01f64..100.0) {
        let a = fit_lmm(&d).unwrap();
        let b = fit_lmm(&d.scale_outcomes(c)).unwrap();
        prop_assert!((b.beta0_hat - a.beta0_hat - c.ln()).abs() < 1e-10);
        prop_assert!((b.beta_hat - a.beta_hat).abs() < 1e-10);
        prop_assert!((b.tau2_hat - a.tau2_hat).abs() < 1e-10);
        prop_assert!((b.sigma2_hat - a.sigma2_hat).abs() < 1e-10);
        prop_assert!((b.se_beta - a.se_beta).abs() < 1e-10);
        prop_assert!((b.p_value - a.p_value).abs() < 1e-10);
    }

    #[test]
    fn arm_label_antisymmetry(d in arb_dataset().prop_filter("needs df", |d| d.len() > d.n_lines + 2)) {
        let a = fit_lmm(&d).unwrap();
        let b = fit_lmm(&d.swap_arms()).unwrap();
        prop_assert!((a.beta_hat + b.beta_hat).abs() < 1e-10);
        prop_assert!((a.t_value().abs() - b.t_value().abs()).abs() < 1e-10);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-10);
    }
}
