//! Monte Carlo power analysis for mixed crossed/nested PDX experiments.
//!
//! `n` patient-derived xenograft lines each contribute `m` animals to the
//! control arm and `m` to the treated arm. For every (n, m) in a grid the
//! engine simulates experiments, fits the analysis model and records how
//! often a Wald test rejects "no treatment effect":
//!
//! * uncensored outcomes: log-normal random-intercept model fitted by REML
//!   ([`lmm`]), Student-t Wald test;
//! * right-censored outcomes: Weibull proportional hazards with a normal
//!   line frailty fitted by adaptive Gauss–Hermite marginal likelihood
//!   ([`frailty`]), normal Wald test.
//!
//! Parameters come from pilot data or from assumed median survival times
//! ([`elicit`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod elicit;
pub mod error;
pub mod frailty;
pub mod io;
pub mod lmm;
pub mod model;
pub mod optimize;
pub mod plot;
pub mod power;
pub mod quadrature;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use frailty::{fit_frailty, frailty_loglik, wald_test_frailty, FrailtyFit};
pub use io::{read_pilot_csv, ParamSource, PowerReport};
pub use lmm::{fit_lmm, wald_test_lmm, LmmFit, WaldReference};
pub use model::{
    validate_grid, AnovaParams, Dataset, DesignGrid, FrailtyParams, PilotDataset, PilotRow,
    PowerRow, PowerTable, Record, ReplicateOutcome,
};
pub use plot::render_power_plot;
pub use power::{minimal_designs, run_power_grid, OutcomeModel, PowerJob, Progress, Workers};
