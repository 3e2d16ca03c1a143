//! Gauss–Hermite rules and the adaptive line integral of the frailty likelihood.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights for `∫ exp(-x²) f(x) dx ≈ Σ w_k f(x_k)`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Computes an `n`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss-Hermite rule needs at least one node");
        const PI_M4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 1..=n.div_ceil(2) {
            z = match i {
                1 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                2 => z - 1.14 * nf.powf(0.426) / z,
                3 => 1.86 * z - 0.86 * x[0],
                4 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 3],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (PI_M4, 0.0);
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 3e-15 * (1.0 + z.abs()) {
                    break;
                }
            }
            x[i - 1] = z;
            x[n - i] = -z;
            w[i - 1] = 2.0 / (pp * pp);
            w[n - i] = w[i - 1];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        x.reverse();
        w.reverse();
        GaussHermite {
            nodes: x,
            weights: w,
        }
    }

    /// Process-wide shared rule; each size is computed once.
    pub fn shared(n: usize) -> &'static GaussHermite {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussHermite>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(n)
            .or_insert_with(|| Box::leak(Box::new(GaussHermite::new(n))))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(A)]` for `A ~ N(mean, sd²)`, non-adaptive.
    pub fn normal_expectation<F: Fn(f64) -> f64>(&self, mean: f64, sd: f64, f: F) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mean + scale * x))
            .sum::<f64>()
            / std::f64::consts::PI.sqrt()
    }
}

/// Log of `h(a) = d·a − c·e^a − a²/(2τ²)`, the log integrand without the
/// normal density's constant.
#[inline]
fn log_kernel(a: f64, events: f64, cum_hazard: f64, inv_tau2: f64) -> f64 {
    events * a - cum_hazard * a.exp() - 0.5 * a * a * inv_tau2
}

/// Mode of the strictly concave `h`, by Newton steps safeguarded with bisection.
pub fn kernel_mode(events: f64, cum_hazard: f64, tau2: f64) -> Result<f64> {
    let inv_tau2 = 1.0 / tau2;
    let score = |a: f64| events - cum_hazard * a.exp() - a * inv_tau2;
    let at_zero = events - cum_hazard;
    let (mut lo, mut hi) = if at_zero >= 0.0 {
        (0.0, events * tau2)
    } else {
        ((events - cum_hazard) * tau2, 0.0)
    };
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Fit("frailty mode search: non-finite bracket".into()));
    }
    if hi - lo == 0.0 {
        return Ok(lo);
    }
    let mut a = if at_zero >= 0.0 {
        // Newton from the exponential-only root when it lies in the bracket.
        let guess = if cum_hazard > 0.0 && events > 0.0 {
            (events / cum_hazard).ln()
        } else {
            hi
        };
        guess.clamp(lo, hi)
    } else {
        lo.max(-700.0).min(hi)
    };
    for _ in 0..200 {
        let s = score(a);
        if s == 0.0 {
            return Ok(a);
        }
        if s > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let curv = cum_hazard * a.exp() + inv_tau2;
        let mut next = a + s / curv;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - a).abs() <= 1e-13 * (1.0 + a.abs()) || hi - lo <= 1e-13 * (1.0 + a.abs()) {
            return Ok(next);
        }
        a = next;
    }
    Err(Error::Fit("frailty mode search did not converge".into()))
}

/// `log ∫ φ(a; 0, τ²) exp(d·a − c·e^a) da` by adaptive Gauss–Hermite
/// quadrature centred at the integrand mode and scaled by its curvature.
///
/// `tau2 == 0` collapses the integral to `exp(-c)`.
pub fn log_line_integral(
    events: f64,
    cum_hazard: f64,
    tau2: f64,
    rule: &GaussHermite,
) -> Result<f64> {
    if tau2 == 0.0 {
        return Ok(-cum_hazard);
    }
    let inv_tau2 = 1.0 / tau2;
    let mode = kernel_mode(events, cum_hazard, tau2)?;
    let h_mode = log_kernel(mode, events, cum_hazard, inv_tau2);
    let curvature = cum_hazard * mode.exp() + inv_tau2;
    let scale = std::f64::consts::SQRT_2 / curvature.sqrt();
    let sum: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let a = mode + scale * x;
            w * (log_kernel(a, events, cum_hazard, inv_tau2) - h_mode + x * x).exp()
        })
        .sum();
    let value = -0.5 * (2.0 * std::f64::consts::PI * tau2).ln() + h_mode + scale.ln() + sum.ln();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Fit("frailty line integral is not finite".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let pi_sqrt = std::f64::consts::PI.sqrt();
        for n in [1, 2, 5, 15, 31, 64] {
            let r = GaussHermite::new(n);
            assert_eq!(r.len(), n);
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            let moment = |p: i32| -> f64 {
                r.nodes()
                    .iter()
                    .zip(r.weights())
                    .map(|(x, w)| w * x.powi(p))
                    .sum()
            };
            assert!((moment(0) - pi_sqrt).abs() < 1e-12, "n={n}");
            if n >= 2 {
                assert!((moment(2) - pi_sqrt / 2.0).abs() < 1e-12);
                assert!(moment(1).abs() < 1e-12);
            }
            if n >= 3 {
                assert!((moment(4) - 0.75 * pi_sqrt).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn normal_expectation_of_exponential() {
        // E[e^A] for A ~ N(0.3, 0.5²) is exp(0.3 + 0.125).
        let r = GaussHermite::new(20);
        let v = r.normal_expectation(0.3, 0.5, f64::exp);
        assert!((v - (0.425f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn mode_solves_score_equation() {
        for &(d, c, t2) in &[
            (3.0, 0.5, 0.2),
            (0.0, 4.0, 1.0),
            (5.0, 5.0, 0.1),
            (2.0, 1e-9, 2.0),
            (0.0, 0.0, 0.3),
        ] {
            let a = kernel_mode(d, c, t2).unwrap();
            let s = d - c * f64::exp(a) - a / t2;
            assert!(s.abs() < 1e-9, "d={d} c={c} score={s}");
        }
    }

    #[test]
    fn no_hazard_no_events_integrates_to_one() {
        let r = GaussHermite::shared(15);
        assert!(log_line_integral(0.0, 0.0, 0.4, r).unwrap().abs() < 1e-12);
        assert_eq!(log_line_integral(2.0, 1.5, 0.0, r).unwrap(), -1.5);
    }
}
