//! Random-intercept mixed-effects ANOVA on log outcomes, fitted by REML.
//!
//! For a fixed variance ratio `theta = tau2 / sigma2` the marginal covariance of
//! a line with `k` animals is `sigma2 * (I + theta * 11')`, whose inverse and
//! determinant are closed-form. Everything the restricted likelihood needs is
//! therefore a function of per-line means and within-line cross products, and
//! the only numerical search left is one-dimensional in `log theta`.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::optimize::brent_minimize;

/// Search interval for `theta`, on the log scale.
pub const THETA_MIN: f64 = 1e-8;
pub const THETA_MAX: f64 = 1e6;
const LOG_THETA_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 41;

/// Reference distribution for the Wald statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaldReference {
    /// Student-t with `N - lines - 1` degrees of freedom.
    #[default]
    StudentT,
    /// Standard normal, for sensitivity checks.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmFit {
    pub beta0_hat: f64,
    pub beta_hat: f64,
    pub se_beta: f64,
    pub tau2_hat: f64,
    pub sigma2_hat: f64,
    /// Denominator degrees of freedom of the t reference.
    pub df: f64,
    pub p_value: f64,
    pub converged: bool,
    pub log_restricted_likelihood: f64,
    /// Fitted variance ratio `tau2 / sigma2` (0 at the boundary).
    pub theta: f64,
}

impl LmmFit {
    pub fn t_value(&self) -> f64 {
        self.beta_hat / self.se_beta
    }
}

#[derive(Debug, Clone, Copy)]
struct LineSummary {
    k: f64,
    mean_t: f64,
    mean_y: f64,
    w_tt: f64,
    w_ty: f64,
    w_yy: f64,
}

/// GLS quantities at one value of `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub theta: f64,
    pub beta0: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub se_beta: f64,
    /// Profiled restricted log-likelihood.
    pub loglik: f64,
}

/// Sufficient statistics of a dataset for the profiled restricted likelihood.
#[derive(Debug, Clone)]
pub struct RemlProfile {
    lines: Vec<LineSummary>,
    n_obs: usize,
}

impl RemlProfile {
    /// Builds the per-line summaries of `log y`.
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.n_lines < 2 {
            return Err(Error::Fit("the mixed model needs at least 2 lines".into()));
        }
        if data.len() < 3 {
            return Err(Error::Fit(
                "the mixed model needs at least 3 observations".into(),
            ));
        }
        if let Some(r) = data
            .records
            .iter()
            .find(|r| !(r.y > 0.0 && r.y.is_finite()))
        {
            return Err(Error::Fit(format!("outcome {} is not positive", r.y)));
        }
        if !data.records.iter().any(|r| r.treated) || !data.records.iter().any(|r| !r.treated) {
            return Err(Error::Fit("both treatment arms must be present".into()));
        }

        let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); data.n_lines];
        for r in &data.records {
            let t = if r.treated { 1.0 } else { 0.0 };
            groups
                .get_mut(r.line)
                .ok_or_else(|| Error::Fit(format!("line index {} out of range", r.line)))?
                .push((t, r.y.ln()));
        }
        let lines: Vec<LineSummary> = groups
            .iter()
            .filter(|g| !g.is_empty())
            .map(|g| {
                let k = g.len() as f64;
                let mean_t = g.iter().map(|p| p.0).sum::<f64>() / k;
                let mean_y = g.iter().map(|p| p.1).sum::<f64>() / k;
                let (mut w_tt, mut w_ty, mut w_yy) = (0.0, 0.0, 0.0);
                for &(t, y) in g {
                    let (dt, dy) = (t - mean_t, y - mean_y);
                    w_tt += dt * dt;
                    w_ty += dt * dy;
                    w_yy += dy * dy;
                }
                LineSummary {
                    k,
                    mean_t,
                    mean_y,
                    w_tt,
                    w_ty,
                    w_yy,
                }
            })
            .collect();
        if lines.len() < 2 {
            return Err(Error::Fit(
                "the mixed model needs at least 2 non-empty lines".into(),
            ));
        }
        Ok(RemlProfile {
            lines,
            n_obs: data.len(),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// GLS estimates and restricted log-likelihood at variance ratio `theta >= 0`.
    pub fn eval(&self, theta: f64) -> ProfilePoint {
        let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
        let (mut b1, mut b2, mut yy) = (0.0, 0.0, 0.0);
        let mut logdet_h = 0.0;
        for g in &self.lines {
            let shrink = 1.0 + g.k * theta;
            let w = g.k / shrink;
            a11 += w;
            a12 += w * g.mean_t;
            a22 += g.w_tt + w * g.mean_t * g.mean_t;
            b1 += w * g.mean_y;
            b2 += g.w_ty + w * g.mean_t * g.mean_y;
            yy += g.w_yy + w * g.mean_y * g.mean_y;
            logdet_h += shrink.ln();
        }
        let det = a11 * a22 - a12 * a12;
        let beta0 = (a22 * b1 - a12 * b2) / det;
        let beta = (a11 * b2 - a12 * b1) / det;
        let resid = (yy - beta0 * b1 - beta * b2).max(0.0);
        let dof = (self.n_obs - 2) as f64;
        let sigma2 = resid / dof;
        let se_beta = (sigma2 * a11 / det).sqrt();
        let loglik = if sigma2 > 0.0 && det > 0.0 {
            -0.5 * (dof * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) + logdet_h + det.ln())
        } else {
            f64::NEG_INFINITY
        };
        ProfilePoint {
            theta,
            beta0,
            beta,
            sigma2,
            se_beta,
            loglik,
        }
    }

    /// Derivative of the profiled restricted log-likelihood with respect to
    /// `log theta`. Unlike the likelihood itself it is well conditioned at
    /// the optimum, so its root pins `theta` down to rounding level.
    pub fn score(&self, theta: f64) -> f64 {
        let p = self.eval(theta);
        let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
        let (mut d11, mut d12, mut d22) = (0.0, 0.0, 0.0);
        let (mut trace_h, mut proj) = (0.0, 0.0);
        for g in &self.lines {
            let w = g.k / (1.0 + g.k * theta);
            a11 += w;
            a12 += w * g.mean_t;
            a22 += g.w_tt + w * g.mean_t * g.mean_t;
            let w2 = w * w;
            d11 += w2;
            d12 += w2 * g.mean_t;
            d22 += w2 * g.mean_t * g.mean_t;
            trace_h += w;
            let e = g.mean_y - p.beta0 - p.beta * g.mean_t;
            proj += w2 * e * e;
        }
        let det = a11 * a22 - a12 * a12;
        let trace_x = (a22 * d11 - 2.0 * a12 * d12 + a11 * d22) / det;
        0.5 * theta * (proj / p.sigma2 - trace_h + trace_x)
    }

    /// Secant iterations on the score, started from a Brent optimum.
    fn polish(&self, log_theta: f64) -> Option<f64> {
        let (mut x0, mut x1) = (log_theta - 1e-4, log_theta);
        let (mut g0, mut g1) = (self.score(x0.exp()), self.score(x1.exp()));
        for _ in 0..50 {
            if g1 == 0.0 || g1 == g0 {
                break;
            }
            let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
            if !x2.is_finite() || (x2 - log_theta).abs() > 1e-2 {
                return None;
            }
            (x0, g0) = (x1, g1);
            x1 = x2;
            g1 = self.score(x1.exp());
            if (x1 - x0).abs() < 1e-14 * (1.0 + x1.abs()) {
                break;
            }
        }
        g1.is_finite().then_some(x1)
    }

    /// Maximises the profiled restricted likelihood over `theta`.
    ///
    /// Returns the optimum and whether the search bracketed an interior or
    /// lower-boundary maximum.
    pub fn maximize(&self) -> (ProfilePoint, bool) {
        let (lo, hi) = (THETA_MIN.ln(), THETA_MAX.ln());
        let grid: Vec<f64> = (0..SCAN_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64)
            .collect();
        let values: Vec<f64> = grid.iter().map(|&x| self.eval(x.exp()).loglik).collect();
        let best = values
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > values[b] { i } else { b });
        let left = grid[best.saturating_sub(1)];
        let right = grid[(best + 1).min(SCAN_POINTS - 1)];
        let found = brent_minimize(
            |x| -self.eval(x.exp()).loglik,
            left,
            right,
            LOG_THETA_TOL,
            500,
        );

        let mut point = self.eval(found.x.exp());
        if let Some(x) = self.polish(found.x) {
            let polished = self.eval(x.exp());
            if polished.loglik >= point.loglik - 1e-9 {
                point = polished;
            }
        }
        if values[best] > point.loglik {
            point = self.eval(grid[best].exp());
        }
        let boundary = self.eval(0.0);
        if boundary.loglik >= point.loglik {
            return (boundary, true);
        }
        // A maximum pinned to the upper end was never bracketed.
        let at_upper = best == SCAN_POINTS - 1 && hi - point.theta.ln() < 1e-6;
        let converged = found.converged && point.loglik.is_finite() && !at_upper;
        (point, converged)
    }
}

/// Two-sided p-value for a Wald statistic.
pub fn wald_p_value(stat: f64, df: f64, reference: WaldReference) -> f64 {
    if !stat.is_finite() {
        return if stat.is_nan() { f64::NAN } else { 0.0 };
    }
    let tail = match reference {
        WaldReference::StudentT => StudentsT::new(0.0, 1.0, df)
            .map(|d| d.sf(stat.abs()))
            .unwrap_or(f64::NAN),
        WaldReference::Normal => Normal::standard().sf(stat.abs()),
    };
    (2.0 * tail).clamp(0.0, 1.0)
}

/// REML fit of `log y = beta0 + tx*beta + a_line + e` with a Student-t Wald test.
pub fn fit_lmm(data: &Dataset) -> Result<LmmFit> {
    fit_lmm_with(data, WaldReference::StudentT)
}

pub fn fit_lmm_with(data: &Dataset, reference: WaldReference) -> Result<LmmFit> {
    let profile = RemlProfile::new(data)?;
    let df = profile.n_obs() as f64 - profile.n_lines() as f64 - 1.0;
    if reference == WaldReference::StudentT && df <= 0.0 {
        return Err(Error::Fit(
            "no residual degrees of freedom for the t reference".into(),
        ));
    }
    let (point, converged) = profile.maximize();
    let converged = converged && point.sigma2 > 0.0 && point.se_beta > 0.0;
    let p_value = wald_p_value(point.beta / point.se_beta, df, reference);
    Ok(LmmFit {
        beta0_hat: point.beta0,
        beta_hat: point.beta,
        se_beta: point.se_beta,
        tau2_hat: point.theta * point.sigma2,
        sigma2_hat: point.sigma2,
        df,
        p_value,
        converged,
        log_restricted_likelihood: point.loglik,
        theta: point.theta,
    })
}

/// Two-sided Wald test of `beta = 0`: rejects when `p_value < alpha`.
pub fn wald_test_lmm(fit: &LmmFit, alpha: f64) -> Result<bool> {
    if !fit.converged {
        return Err(Error::Fit(
            "Wald test requested on a non-converged fit".into(),
        ));
    }
    Ok(fit.p_value < alpha)
}
