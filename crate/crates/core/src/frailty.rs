//! Weibull proportional-hazards model with a normal line frailty, fitted by
//! maximum marginal likelihood.
//!
//! Conditional on the frailty `a`, animal `j` of line `i` contributes
//! `(λ ν y^(ν-1) e^(η+a))^δ · exp(-λ y^ν e^(η+a))`. Per line this factorises
//! into a term free of `a` and `exp(D_i a − A_i e^a)`, with `D_i` the line's
//! event count and `A_i` its cumulative hazard at `a = 0`, so each line
//! integral is one call to [`log_line_integral`].
//!
//! The optimiser works on `(log λ, log ν, β, log τ)`.

use crate::error::{Error, Result};
use crate::lmm::{wald_p_value, WaldReference};
use crate::model::Dataset;
use crate::optimize::{bfgs, hessian_richardson, spd_inverse, BfgsOptions};
use crate::quadrature::{log_line_integral, GaussHermite};

pub const DEFAULT_QUAD_POINTS: usize = 15;
/// Rule used to confirm the default rule has converged at the optimum.
pub const CHECK_QUAD_POINTS: usize = 31;
pub const QUAD_TOLERANCE: f64 = 1e-4;
/// Floor on the frailty standard deviation; hitting it reports `tau2 = 0`.
pub const TAU_FLOOR: f64 = 1e-5;
pub const TAU_START: f64 = 0.3;
pub const MAX_ITERATIONS: usize = 500;
pub const HESSIAN_STEP: f64 = 1e-3;
/// Below this curvature (per unit `log τ`) the frailty variance is treated
/// as unidentified and left out of the covariance of the other parameters.
const MIN_TAU_CURVATURE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrailtyFit {
    pub lambda_hat: f64,
    pub nu_hat: f64,
    pub beta_hat: f64,
    pub se_beta: f64,
    pub tau2_hat: f64,
    pub p_value: f64,
    pub converged: bool,
    pub log_likelihood: f64,
    /// Log-likelihood at the optimiser's starting point.
    pub start_log_likelihood: f64,
    pub quad_points: usize,
    pub iterations: usize,
    /// Whether `log τ` was kept in the inverted Hessian behind `se_beta`.
    pub tau_in_covariance: bool,
}

impl FrailtyFit {
    pub fn z_value(&self) -> f64 {
        self.beta_hat / self.se_beta
    }
}

#[derive(Debug, Clone)]
struct Line {
    events: f64,
    /// `log y` of control and treated animals.
    log_y_ctl: Vec<f64>,
    log_y_trt: Vec<f64>,
}

/// Pre-grouped data for repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub struct FrailtyLikelihood {
    lines: Vec<Line>,
    events: f64,
    events_treated: f64,
    events_log_y: f64,
}

impl FrailtyLikelihood {
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Fit("no observations".into()));
        }
        let mut lines = vec![
            Line {
                events: 0.0,
                log_y_ctl: Vec::new(),
                log_y_trt: Vec::new(),
            };
            data.n_lines
        ];
        let (mut events, mut events_treated, mut events_log_y) = (0.0, 0.0, 0.0);
        for r in &data.records {
            if !(r.y > 0.0 && r.y.is_finite()) {
                return Err(Error::Fit(format!("survival time {} is not positive", r.y)));
            }
            let line = lines
                .get_mut(r.line)
                .ok_or_else(|| Error::Fit(format!("line index {} out of range", r.line)))?;
            let ly = r.y.ln();
            if r.treated {
                line.log_y_trt.push(ly);
            } else {
                line.log_y_ctl.push(ly);
            }
            if r.event {
                line.events += 1.0;
                events += 1.0;
                events_log_y += ly;
                if r.treated {
                    events_treated += 1.0;
                }
            }
        }
        lines.retain(|l| !l.log_y_ctl.is_empty() || !l.log_y_trt.is_empty());
        Ok(FrailtyLikelihood {
            lines,
            events,
            events_treated,
            events_log_y,
        })
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Marginal log-likelihood at `(λ, ν, β, τ²)`.
    pub fn loglik(
        &self,
        lambda: f64,
        nu: f64,
        beta: f64,
        tau2: f64,
        rule: &GaussHermite,
    ) -> Result<f64> {
        if !(lambda > 0.0 && nu > 0.0 && tau2 >= 0.0) || !beta.is_finite() {
            return Err(Error::Fit("frailty parameters out of range".into()));
        }
        let mut total = self.events * (lambda.ln() + nu.ln())
            + (nu - 1.0) * self.events_log_y
            + beta * self.events_treated;
        let hr = beta.exp();
        for line in &self.lines {
            let ctl: f64 = line.log_y_ctl.iter().map(|ly| (nu * ly).exp()).sum();
            let trt: f64 = line.log_y_trt.iter().map(|ly| (nu * ly).exp()).sum();
            let cum_hazard = lambda * (ctl + hr * trt);
            total += log_line_integral(line.events, cum_hazard, tau2, rule)?;
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::Fit("log-likelihood is not finite".into()))
        }
    }

    /// Log-likelihood on the optimiser's coordinates `(log λ, log ν, β, log τ)`;
    /// a three-element vector means no frailty.
    fn loglik_transformed(&self, x: &[f64], rule: &GaussHermite) -> f64 {
        let tau2 = match x.get(3) {
            Some(&log_tau) => {
                let tau = log_tau.exp().max(TAU_FLOOR);
                tau * tau
            }
            None => 0.0,
        };
        self.loglik(x[0].exp(), x[1].exp(), x[2], tau2, rule)
            .unwrap_or(f64::NAN)
    }
}

/// Marginal log-likelihood of `data` under the Weibull normal-frailty model.
pub fn frailty_loglik(
    lambda: f64,
    nu: f64,
    beta: f64,
    tau2: f64,
    data: &Dataset,
    quad_points: usize,
) -> Result<f64> {
    FrailtyLikelihood::new(data)?.loglik(lambda, nu, beta, tau2, GaussHermite::shared(quad_points))
}

/// Starting `(log λ, log ν)` from a least-squares fit of `log(-log S)` on
/// `log t` at the event times, with `S` taken from rank plotting positions.
/// Falls back to the exponential estimate `λ = events / Σy`, `ν = 1`.
fn weibull_start(data: &Dataset) -> (f64, f64) {
    let events = data.records.iter().filter(|r| r.event).count() as f64;
    let exposure: f64 = data.records.iter().map(|r| r.y).sum();
    let exponential = ((events / exposure).ln(), 0.0);

    let mut sorted: Vec<_> = data.records.iter().collect();
    sorted.sort_by(|a, b| a.y.total_cmp(&b.y));
    let total = sorted.len() as f64;
    let points: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .filter(|(_, r)| r.event)
        .map(|(rank, r)| {
            let surv = 1.0 - (rank as f64 + 1.0) / (total + 1.0);
            (r.y.ln(), (-surv.ln()).ln())
        })
        .collect();
    if points.len() < 2 {
        return exponential;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return exponential;
    }
    let nu = sxy / sxx;
    if !(nu.is_finite() && nu > 0.0) {
        return exponential;
    }
    let nu = nu.clamp(0.1, 10.0);
    (my - nu * mx, nu.ln())
}

/// Fits the Weibull normal-frailty model and its Wald test of `β = 0`.
///
/// A fit that the optimiser, the Hessian or the quadrature check cannot
/// vouch for comes back with `converged = false`. Data that cannot identify
/// the model (a treatment arm without events, fewer than two lines) is an error.
pub fn fit_frailty(data: &Dataset, quad_points: usize) -> Result<FrailtyFit> {
    if quad_points == 0 {
        return Err(Error::Fit("quadrature needs at least one node".into()));
    }
    let lik = FrailtyLikelihood::new(data)?;
    if lik.n_lines() < 2 {
        return Err(Error::Fit(
            "the frailty model needs at least 2 lines".into(),
        ));
    }
    for (treated, arm) in [(false, "control"), (true, "treated")] {
        if data.events_in_arm(treated) == 0 {
            return Err(Error::Fit(format!("no observed events in the {arm} arm")));
        }
    }
    let rule = GaussHermite::shared(quad_points);
    let opts = BfgsOptions {
        max_iter: MAX_ITERATIONS,
        ..BfgsOptions::default()
    };

    let (log_lambda0, log_nu0) = weibull_start(data);
    let no_frailty = bfgs(
        |x| -lik.loglik_transformed(x, rule),
        &[log_lambda0, log_nu0, 0.0],
        &opts,
    );
    let start = [
        no_frailty.x[0],
        no_frailty.x[1],
        no_frailty.x[2],
        TAU_START.ln(),
    ];
    let start_ll = lik.loglik_transformed(&start, rule);
    if !start_ll.is_finite() {
        return Err(Error::Fit(
            "log-likelihood is not finite at the starting point".into(),
        ));
    }

    let mut objective = |x: &[f64]| -lik.loglik_transformed(x, rule);
    let best = bfgs(&mut objective, &start, &opts);
    let mut converged = best.converged;
    let x = best.x;
    let log_likelihood = -best.fx;

    let tau = x[3].exp().max(TAU_FLOOR);
    let at_floor = tau <= TAU_FLOOR;
    let tau2_hat = if at_floor { 0.0 } else { tau * tau };

    // Covariance from the negative Hessian, dropping log τ when it is flat.
    let mut se_beta = f64::NAN;
    let h = hessian_richardson(&mut objective, &x, HESSIAN_STEP);
    let keep_tau = !at_floor && h[3][3] >= MIN_TAU_CURVATURE;
    let idx: Vec<usize> = if keep_tau {
        vec![0, 1, 2, 3]
    } else {
        vec![0, 1, 2]
    };
    let sub: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| h[i][j]).collect())
        .collect();
    match spd_inverse(&sub) {
        Some(cov) if cov[2][2] > 0.0 && cov[2][2].is_finite() => se_beta = cov[2][2].sqrt(),
        _ => converged = false,
    }

    let check = lik.loglik_transformed(&x, GaussHermite::shared(CHECK_QUAD_POINTS));
    if !((log_likelihood - check).abs() <= QUAD_TOLERANCE) {
        converged = false;
    }

    let beta_hat = x[2];
    let p_value = if se_beta.is_finite() {
        wald_p_value(beta_hat / se_beta, f64::INFINITY, WaldReference::Normal)
    } else {
        f64::NAN
    };
    Ok(FrailtyFit {
        lambda_hat: x[0].exp(),
        nu_hat: x[1].exp(),
        beta_hat,
        se_beta,
        tau2_hat,
        p_value,
        converged,
        log_likelihood,
        start_log_likelihood: start_ll,
        quad_points,
        iterations: best.iterations,
        tau_in_covariance: keep_tau,
    })
}

/// Two-sided normal-reference Wald test: rejects when `2(1 − Φ(|β̂|/se)) < alpha`.
pub fn wald_test_frailty(fit: &FrailtyFit, alpha: f64) -> Result<bool> {
    if !fit.converged {
        return Err(Error::Fit(
            "Wald test requested on a non-converged fit".into(),
        ));
    }
    Ok(fit.p_value < alpha)
}
