mod common;

use common::{animals2, trapezoid_loglik};
use pdxpow_core::datagen::gen_frailty;
use pdxpow_core::frailty::{FrailtyLikelihood, CHECK_QUAD_POINTS, QUAD_TOLERANCE};
use pdxpow_core::quadrature::GaussHermite;
use pdxpow_core::rng::{replicate_stream, seeded_stream};
use pdxpow_core::{fit_frailty, frailty_loglik, wald_test_frailty, Dataset, FrailtyParams};

fn small_dataset(seed: u64) -> Dataset {
    // Two lines of at most three animals, mixed censoring.
    let p = FrailtyParams::new(0.3, 1.3, -0.5, 0.4, Some(4.0)).unwrap();
    let mut d = gen_frailty(2, 2, &p, &mut seeded_stream(seed));
    d.records.truncate(6 - (seed as usize % 2));
    d
}

fn frailty_sample(n: usize, m: usize, p: &FrailtyParams, seed: u64) -> Dataset {
    gen_frailty(n, m, p, &mut seeded_stream(seed))
}

#[test]
fn quadrature_matches_trapezoid_on_small_datasets() {
    for seed in 0..6 {
        let d = small_dataset(seed);
        for (lambda, nu, beta, tau2) in [
            (0.3, 1.3, -0.5, 0.4),
            (0.05, 2.0, 0.8, 0.05),
            (1.2, 0.7, 0.0, 0.8),
        ] {
            let quad = frailty_loglik(lambda, nu, beta, tau2, &d, 15).unwrap();
            let trap = trapezoid_loglik(lambda, nu, beta, tau2, &d);
            assert!((quad - trap).abs() < 1e-6, "seed {seed}: {quad} vs {trap}");
        }
        // Heavy frailty skews the line integrand; the fit's check rule still resolves it.
        let quad = frailty_loglik(1.2, 0.7, 0.0, 1.5, &d, CHECK_QUAD_POINTS).unwrap();
        let trap = trapezoid_loglik(1.2, 0.7, 0.0, 1.5, &d);
        assert!((quad - trap).abs() < 1e-6, "seed {seed}: {quad} vs {trap}");
    }
}

#[test]
fn quadrature_matches_trapezoid_on_animals2() {
    let d = animals2().to_dataset();
    for (lambda, nu, beta, tau2) in [(0.0154, 2.1722, -0.8794, 0.0422), (0.02, 1.8, -0.6, 0.2)] {
        let quad = frailty_loglik(lambda, nu, beta, tau2, &d, 15).unwrap();
        let trap = trapezoid_loglik(lambda, nu, beta, tau2, &d);
        assert!((quad - trap).abs() < 1e-6, "{quad} vs {trap}");
    }
}

#[test]
fn animals2_fit_is_within_reference_tolerances() {
    let fit = fit_frailty(&animals2().to_dataset(), 15).unwrap();
    assert!(fit.converged);
    assert!((fit.beta_hat + 0.8794).abs() <= 0.15, "{fit:?}");
    assert!((fit.nu_hat - 2.1722).abs() <= 0.35, "{fit:?}");
    let ratio = fit.lambda_hat / 0.0154;
    assert!((1.0 / 1.6..=1.6).contains(&ratio), "{fit:?}");
    assert!((0.0..=0.25).contains(&fit.tau2_hat), "{fit:?}");
}

#[test]
fn reported_animals2_optimum_is_nearly_stationary() {
    let d = animals2().to_dataset();
    let lik = FrailtyLikelihood::new(&d).unwrap();
    let rule = GaussHermite::shared(15);
    let x = [
        0.0154f64.ln(),
        2.1722f64.ln(),
        -0.8794,
        0.0422f64.sqrt().ln(),
    ];
    let ll = |x: &[f64]| {
        lik.loglik(x[0].exp(), x[1].exp(), x[2], (2.0 * x[3]).exp(), rule)
            .unwrap()
    };
    for i in 0..4 {
        let h = 1e-5;
        let (mut up, mut down) = (x, x);
        up[i] += h;
        down[i] -= h;
        let partial = (ll(&up) - ll(&down)) / (2.0 * h);
        assert!(partial.abs() <= 0.5, "coordinate {i}: {partial}");
    }
}

#[test]
fn consistent_at_truth_with_large_samples() {
    let p = FrailtyParams::new(0.3, 1.0, 0.0, 0.0, Some(8.0)).unwrap();
    let fit = fit_frailty(&frailty_sample(50, 20, &p, 1), 15).unwrap();
    assert!(fit.converged);
    assert!(fit.beta_hat.abs() <= 0.05, "{fit:?}");
    assert!((fit.nu_hat - 1.0).abs() <= 0.05, "{fit:?}");
}

#[test]
fn arm_without_events_is_rejected() {
    let p = FrailtyParams::new(0.3, 1.0, 0.0, 0.1, Some(8.0)).unwrap();
    let mut d = frailty_sample(3, 3, &p, 5);
    for r in d.records.iter_mut().filter(|r| r.treated) {
        r.event = false;
    }
    assert!(fit_frailty(&d, 15).is_err());
}

#[test]
fn simulated_null_rejection_rate() {
    let p = FrailtyParams::new(0.3, 1.0, 0.0, 0.2, Some(8.0)).unwrap();
    let (mut rejected, mut used) = (0, 0);
    for r in 0..2000 {
        let d = gen_frailty(5, 5, &p, &mut replicate_stream(7, 5, 5, r));
        if let Ok(fit) = fit_frailty(&d, 15) {
            if fit.converged {
                used += 1;
                rejected += wald_test_frailty(&fit, 0.05).unwrap() as usize;
            }
        }
    }
    let rate = rejected as f64 / used as f64;
    assert!(used >= 1900);
    assert!((rate - 0.05).abs() <= 0.015, "rejection rate {rate}");
}

/// Fitted datasets spanning weak and strong frailty, light and heavy censoring.
fn property_datasets() -> Vec<Dataset> {
    let settings = [
        (0.3, 1.0, -0.8, 0.3, 8.0, 4, 3),
        (0.05, 1.8, 0.6, 0.1, 6.0, 5, 2),
        (0.5, 0.8, 0.0, 0.6, 3.0, 3, 4),
        (0.2, 1.2, 1.1, 0.05, 10.0, 6, 3),
    ];
    let mut out = Vec::new();
    for (k, &(lambda, nu, beta, tau2, ct, n, m)) in settings.iter().enumerate() {
        let p = FrailtyParams::new(lambda, nu, beta, tau2, Some(ct)).unwrap();
        for seed in 0..5 {
            let d = frailty_sample(n, m, &p, 1000 * k as u64 + seed);
            if d.events_in_arm(false) > 0 && d.events_in_arm(true) > 0 {
                out.push(d);
            }
        }
    }
    out
}

#[test]
fn time_rescaling_equivariance() {
    for (i, d) in property_datasets().iter().enumerate() {
        let a = fit_frailty(d, 15).unwrap();
        if !a.converged {
            continue;
        }
        for c in [0.1, 7.0] {
            let b = fit_frailty(&d.scale_outcomes(c), 15).unwrap();
            assert!(b.converged, "dataset {i}, c {c}");
            let mapped = a.lambda_hat / c.powf(a.nu_hat);
            assert!(
                (b.lambda_hat / mapped - 1.0).abs() < 1e-4,
                "dataset {i}: {a:?} {b:?}"
            );
            assert!(
                (b.nu_hat - a.nu_hat).abs() < 1e-4,
                "dataset {i}: {a:?} {b:?}"
            );
            assert!(
                (b.beta_hat - a.beta_hat).abs() < 1e-4,
                "dataset {i}: {a:?} {b:?}"
            );
            assert!(
                (b.tau2_hat - a.tau2_hat).abs() < 1e-4,
                "dataset {i}: {a:?} {b:?}"
            );
            assert!(
                (b.p_value - a.p_value).abs() < 1e-4,
                "dataset {i}: {a:?} {b:?}"
            );
        }
    }
}

#[test]
fn arm_label_antisymmetry() {
    for (i, d) in property_datasets().iter().enumerate() {
        let a = fit_frailty(d, 15).unwrap();
        let b = fit_frailty(&d.swap_arms(), 15).unwrap();
        if !(a.converged && b.converged) {
            continue;
        }
        assert!(
            (a.beta_hat + b.beta_hat).abs() < 1e-4,
            "dataset {i}: {a:?} {b:?}"
        );
        assert!(
            (a.z_value().abs() - b.z_value().abs()).abs() < 1e-6,
            "dataset {i}: {a:?} {b:?}"
        );
    }
}

#[test]
fn likelihood_dominance_and_quadrature_agreement() {
    let mut converged = 0;
    for d in property_datasets() {
        let fit = fit_frailty(&d, 15).unwrap();
        assert!(fit.log_likelihood >= fit.start_log_likelihood);
        if fit.converged {
            converged += 1;
            let fine = frailty_loglik(
                fit.lambda_hat,
                fit.nu_hat,
                fit.beta_hat,
                fit.tau2_hat,
                &d,
                CHECK_QUAD_POINTS,
            )
            .unwrap();
            let coarse = frailty_loglik(
                fit.lambda_hat,
                fit.nu_hat,
                fit.beta_hat,
                fit.tau2_hat,
                &d,
                15,
            )
            .unwrap();
            assert!((fine - coarse).abs() <= QUAD_TOLERANCE);
        }
    }
    assert!(converged >= 15);
}
