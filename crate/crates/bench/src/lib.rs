//! Shared inputs for the benchmarks in `benches/`.

use pdxpow_core::datagen::{gen_anova, gen_frailty};
use pdxpow_core::io::parse_pilot_csv;
use pdxpow_core::rng::seeded_stream;
use pdxpow_core::{AnovaParams, Dataset, FrailtyParams};

pub fn animals1() -> Dataset {
    parse_pilot_csv(include_str!("../../../data/animals1.csv").as_bytes())
        .expect("bundled pilot data")
        .to_dataset()
}

pub fn animals2() -> Dataset {
    parse_pilot_csv(include_str!("../../../data/animals2.csv").as_bytes())
        .expect("bundled pilot data")
        .to_dataset()
}

/// Parameters elicited from medians of 2.4 and 7.2 time units.
pub fn anova_params() -> AnovaParams {
    AnovaParams::new(2.4f64.ln(), (2.4f64 / 7.2).ln(), 1.0 / 9.0, 1.0).expect("valid parameters")
}

pub fn frailty_params() -> FrailtyParams {
    FrailtyParams::new(2f64.ln() / 2.4, 1.0, (2.4f64 / 7.2).ln(), 0.1, Some(12.0))
        .expect("valid parameters")
}

/// Simulated experiment of `n` lines by `m` animals per arm.
pub fn anova_sample(n: usize, m: usize) -> Dataset {
    gen_anova(n, m, &anova_params(), &mut seeded_stream(7))
}

pub fn frailty_sample(n: usize, m: usize) -> Dataset {
    gen_frailty(n, m, &frailty_params(), &mut seeded_stream(7))
}
