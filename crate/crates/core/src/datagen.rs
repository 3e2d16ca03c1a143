//! Monte Carlo samples under the mixed crossed/nested design.
//!
//! Each of the `n` lines contributes `m` control and `m` treated animals.
//! All line effects are drawn first, in line order, then the animals line by
//! line (controls before treated), so a dataset is a pure function of its stream.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::model::{AnovaParams, Dataset, FrailtyParams, Record};
use crate::rng::Stream;

fn line_effects(n: usize, tau2: f64, stream: &mut Stream) -> Vec<f64> {
    let sd = tau2.sqrt();
    (0..n)
        .map(|_| sd * stream.sample::<f64, _>(StandardNormal))
        .collect()
}

fn arms(m: usize) -> impl Iterator<Item = bool> {
    std::iter::repeat_n(false, m).chain(std::iter::repeat_n(true, m))
}

/// Log-normal outcomes: `y = exp(beta0 + tx*beta + a_i + e_ij)`; every status is an event.
pub fn gen_anova(n: usize, m: usize, params: &AnovaParams, stream: &mut Stream) -> Dataset {
    let effects = line_effects(n, params.tau2, stream);
    let sigma = params.sigma2.sqrt();
    let mut records = Vec::with_capacity(2 * n * m);
    for (line, &a) in effects.iter().enumerate() {
        for treated in arms(m) {
            let e = sigma * stream.sample::<f64, _>(StandardNormal);
            let tx = if treated { params.beta } else { 0.0 };
            records.push(Record {
                line,
                treated,
                y: (params.beta0 + tx + a + e).exp(),
                event: true,
            });
        }
    }
    Dataset {
        n_lines: n,
        records,
    }
}

/// Latent Weibull time by inverting `S(t) = exp(-lambda t^nu e^eta)`.
pub fn weibull_time(u: f64, lambda: f64, nu: f64, eta: f64) -> f64 {
    (-u.ln() / (lambda * eta.exp())).powf(1.0 / nu)
}

/// Weibull frailty outcomes, administratively censored at `params.censor_time` if set.
pub fn gen_frailty(n: usize, m: usize, params: &FrailtyParams, stream: &mut Stream) -> Dataset {
    let effects = line_effects(n, params.tau2, stream);
    let mut records = Vec::with_capacity(2 * n * m);
    for (line, &a) in effects.iter().enumerate() {
        for treated in arms(m) {
            let u: f64 = stream.sample(Open01);
            let eta = if treated { params.beta } else { 0.0 } + a;
            let t = weibull_time(u, params.lambda, params.nu, eta);
            let (y, event) = match params.censor_time {
                Some(ct) if t > ct => (ct, false),
                _ => (t, true),
            };
            records.push(Record {
                line,
                treated,
                y,
                event,
            });
        }
    }
    Dataset {
        n_lines: n,
        records,
    }
}
