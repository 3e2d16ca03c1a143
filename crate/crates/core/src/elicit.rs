//! Simulation parameters from pilot data or from assumed median survival times.
//!
//! Both median-based paths use the sign convention `beta = log(ctl / tx)`, so a
//! treatment that lengthens survival gets a negative `beta` even on the ANOVA
//! log-time scale. Two-sided Wald power does not depend on the sign.

use crate::error::{Error, Result};
use crate::frailty::{fit_frailty, DEFAULT_QUAD_POINTS};
use crate::lmm::fit_lmm;
use crate::model::{AnovaParams, FrailtyParams, PilotDataset};

pub const DEFAULT_ICC: f64 = 0.1;
pub const DEFAULT_SIGMA2: f64 = 1.0;
pub const DEFAULT_NU: f64 = 1.0;
pub const DEFAULT_TAU2: f64 = 0.1;

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("{field} must be positive")))
    }
}

/// Mixed-model REML estimates on `log Y` of uncensored pilot data.
pub fn elicit_anova_from_pilot(data: &PilotDataset) -> Result<AnovaParams> {
    if data.rows().iter().any(|r| r.status == Some(false)) {
        return Err(Error::Data(
            "pilot data for the ANOVA model must be uncensored (all status = 1)".into(),
        ));
    }
    let fit = fit_lmm(&data.to_dataset())?;
    if !fit.converged {
        return Err(Error::Fit(
            "the mixed model did not converge on the pilot data".into(),
        ));
    }
    AnovaParams::new(fit.beta0_hat, fit.beta_hat, fit.tau2_hat, fit.sigma2_hat)
}

/// ANOVA parameters from median survival times and the intra-line correlation.
///
/// `beta0 = log(ctl_med)`, `beta = log(ctl_med) − log(tx_med)`,
/// `tau2 = sigma2 · icc / (1 − icc)`.
pub fn elicit_anova_from_medians(
    ctl_med: f64,
    tx_med: f64,
    icc: f64,
    sigma2: f64,
) -> Result<AnovaParams> {
    let ctl_med = positive("ctl_med", ctl_med)?;
    let tx_med = positive("tx_med", tx_med)?;
    let sigma2 = positive("sigma2", sigma2)?;
    if !(0.0..1.0).contains(&icc) {
        return Err(Error::invalid("icc", "icc must lie in [0, 1)"));
    }
    AnovaParams::new(
        ctl_med.ln(),
        ctl_med.ln() - tx_med.ln(),
        sigma2 * icc / (1.0 - icc),
        sigma2,
    )
}

/// Weibull frailty estimates from censored pilot data. The censoring time of
/// the planned experiment is the caller's choice and is left unset.
pub fn elicit_frailty_from_pilot(data: &PilotDataset) -> Result<FrailtyParams> {
    if !data.has_status() {
        return Err(Error::Data(
            "pilot data for the frailty model needs a status column".into(),
        ));
    }
    if data.rows().iter().all(|r| r.status == Some(false)) {
        return Err(Error::Data("pilot data has no observed events".into()));
    }
    let fit = fit_frailty(&data.to_dataset(), DEFAULT_QUAD_POINTS)?;
    if !fit.converged {
        return Err(Error::Fit(
            "the frailty model did not converge on the pilot data".into(),
        ));
    }
    FrailtyParams::new(fit.lambda_hat, fit.nu_hat, fit.beta_hat, fit.tau2_hat, None)
}

/// Weibull frailty parameters from median survival times.
///
/// `beta = nu · (log ctl_med − log tx_med)` and `lambda = log 2 / ctl_med^nu`,
/// i.e. calibrated to the median of a line with zero frailty.
pub fn elicit_frailty_from_medians(
    ctl_med: f64,
    tx_med: f64,
    nu: f64,
    tau2: f64,
) -> Result<FrailtyParams> {
    let ctl_med = positive("ctl_med", ctl_med)?;
    let tx_med = positive("tx_med", tx_med)?;
    let nu = positive("nu", nu)?;
    FrailtyParams::new(
        std::f64::consts::LN_2 / ctl_med.powf(nu),
        nu,
        nu * (ctl_med.ln() - tx_med.ln()),
        tau2,
        None,
    )
}
