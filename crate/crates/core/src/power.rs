//! Monte Carlo power over an (n, m) design grid.
//!
//! Every (cell, replicate) pair is an independent task: it derives its own
//! stream from `(seed, n, m, replicate)`, simulates a dataset, fits the
//! analysis model and applies the Wald test. Tasks run on a bounded worker
//! pool and are reduced per cell in replicate order, so the table does not
//! depend on the number of workers.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{gen_anova, gen_frailty};
use crate::error::{Error, Result};
use crate::frailty::{fit_frailty, DEFAULT_QUAD_POINTS};
use crate::lmm::{fit_lmm_with, WaldReference};
use crate::model::{
    validate_grid, AnovaParams, DesignGrid, FrailtyParams, PowerRow, PowerTable, ReplicateOutcome,
};
use crate::rng::replicate_stream;

pub const DEFAULT_TARGET_POWER: f64 = 0.8;
/// Cells converging less often than this (percent) abort the run.
pub const MIN_CONVERGENCE_PCT: f64 = 50.0;
/// Cells converging less often than this (percent) are flagged.
pub const WARN_CONVERGENCE_PCT: f64 = 99.0;

/// Data-generating and analysis model of a power study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutcomeModel {
    Anova(AnovaParams),
    Frailty(FrailtyParams),
}

impl OutcomeModel {
    pub fn validate(self) -> Result<Self> {
        Ok(match self {
            OutcomeModel::Anova(p) => OutcomeModel::Anova(p.validate()?),
            OutcomeModel::Frailty(p) => OutcomeModel::Frailty(p.validate()?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    /// Let the pool size itself (honours `RAYON_NUM_THREADS`).
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerJob {
    pub grid: DesignGrid,
    pub model: OutcomeModel,
    pub target_power: f64,
    pub workers: Workers,
    /// Reference distribution of the ANOVA Wald test.
    pub anova_reference: WaldReference,
}

impl PowerJob {
    pub fn new(grid: DesignGrid, model: OutcomeModel) -> Self {
        PowerJob {
            grid,
            model,
            target_power: DEFAULT_TARGET_POWER,
            workers: Workers::Auto,
            anova_reference: WaldReference::StudentT,
        }
    }

    pub fn with_workers(mut self, workers: Workers) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_target_power(mut self, target: f64) -> Self {
        self.target_power = target;
        self
    }

    pub fn validate(self) -> Result<Self> {
        let grid = validate_grid(self.grid)?;
        let model = self.model.validate()?;
        if !(self.target_power > 0.0 && self.target_power <= 1.0) {
            return Err(Error::invalid(
                "target_power",
                "target power must lie in (0, 1]",
            ));
        }
        if self.workers == Workers::Fixed(0) {
            return Err(Error::invalid("workers", "worker count must be positive"));
        }
        Ok(PowerJob {
            grid,
            model,
            ..self
        })
    }
}

/// Progress notification: `completed` of `total` cells are finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
}

/// Runs one replicate of cell (n, m): simulate, fit, test.
pub fn simulate_replicate(
    model: &OutcomeModel,
    anova_reference: WaldReference,
    n: usize,
    m: usize,
    alpha: f64,
    seed: u64,
    replicate: usize,
) -> ReplicateOutcome {
    let mut stream = replicate_stream(seed, n, m, replicate);
    match model {
        OutcomeModel::Anova(p) => {
            let data = gen_anova(n, m, p, &mut stream);
            let fit = fit_lmm_with(&data, anova_reference)
                .ok()
                .filter(|f| f.converged);
            ReplicateOutcome {
                converged: fit.is_some(),
                rejected: fit.is_some_and(|f| f.p_value < alpha),
                censoring_fraction: None,
            }
        }
        OutcomeModel::Frailty(p) => {
            let data = gen_frailty(n, m, p, &mut stream);
            let fit = fit_frailty(&data, DEFAULT_QUAD_POINTS)
                .ok()
                .filter(|f| f.converged);
            ReplicateOutcome {
                converged: fit.is_some(),
                rejected: fit.is_some_and(|f| f.p_value < alpha),
                censoring_fraction: p.censor().then(|| data.censoring_fraction()),
            }
        }
    }
}

/// Folds the replicates of one cell, in replicate order.
pub fn summarize_cell(n: usize, m: usize, outcomes: &[ReplicateOutcome]) -> PowerRow {
    let sim = outcomes.len();
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let rejected = outcomes
        .iter()
        .filter(|o| o.converged && o.rejected)
        .count();
    let censoring_pct = if outcomes.iter().all(|o| o.censoring_fraction.is_some()) && sim > 0 {
        let total: f64 = outcomes.iter().filter_map(|o| o.censoring_fraction).sum();
        Some(100.0 * total / sim as f64)
    } else {
        None
    };
    PowerRow {
        n,
        m,
        total_animals: 2 * n * m,
        power_pct: if converged > 0 {
            100.0 * rejected as f64 / converged as f64
        } else {
            0.0
        },
        convergence_pct: 100.0 * converged as f64 / sim.max(1) as f64,
        censoring_pct,
    }
}

pub fn run_power_grid(job: &PowerJob) -> Result<PowerTable> {
    run_power_grid_with_progress(job, |_| {})
}

/// Runs the full grid, calling `progress` from worker threads as cells finish.
pub fn run_power_grid_with_progress<P>(job: &PowerJob, progress: P) -> Result<PowerTable>
where
    P: Fn(Progress) + Sync,
{
    let job = job.clone().validate()?;
    let grid = &job.grid;
    let cells: Vec<(usize, usize)> = grid.cells().collect();
    let sim = grid.sim;
    let remaining: Vec<AtomicUsize> = cells.iter().map(|_| AtomicUsize::new(sim)).collect();
    let finished = AtomicUsize::new(0);

    let run = || -> Vec<ReplicateOutcome> {
        (0..cells.len() * sim)
            .into_par_iter()
            .map(|task| {
                let (cell, replicate) = (task / sim, task % sim);
                let (n, m) = cells[cell];
                let out = simulate_replicate(
                    &job.model,
                    job.anova_reference,
                    n,
                    m,
                    grid.alpha,
                    grid.seed,
                    replicate,
                );
                if remaining[cell].fetch_sub(1, Ordering::AcqRel) == 1 {
                    let completed = finished.fetch_add(1, Ordering::AcqRel) + 1;
                    progress(Progress {
                        completed,
                        total: cells.len(),
                    });
                }
                out
            })
            .collect()
    };
    let outcomes = match job.workers {
        Workers::Auto => run(),
        Workers::Fixed(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Engine(format!("cannot start worker pool: {e}")))?
            .install(run),
    };

    let rows: Vec<PowerRow> = cells
        .iter()
        .zip(outcomes.chunks(sim))
        .map(|(&(n, m), chunk)| summarize_cell(n, m, chunk))
        .collect();
    if let Some(bad) = rows
        .iter()
        .find(|r| r.convergence_pct < MIN_CONVERGENCE_PCT)
    {
        return Err(Error::Engine(format!(
            "only {:.1}% of replicates converged for n = {}, m = {}",
            bad.convergence_pct, bad.n, bad.m
        )));
    }
    Ok(PowerTable { rows })
}

/// Cells whose convergence rate is below [`WARN_CONVERGENCE_PCT`].
pub fn convergence_warnings(table: &PowerTable) -> Vec<String> {
    table
        .rows
        .iter()
        .filter(|r| r.convergence_pct < WARN_CONVERGENCE_PCT)
        .map(|r| {
            format!(
                "n = {}, m = {}: only {:.1}% of fits converged; power is over converged replicates",
                r.n, r.m, r.convergence_pct
            )
        })
        .collect()
}

/// Pareto frontier of designs reaching `target_power` (a proportion): a
/// qualifying (n, m) is kept unless another qualifying design uses no more
/// lines and no more animals per arm. Ordered by ascending n.
pub fn minimal_designs(table: &PowerTable, target_power: f64) -> Vec<(usize, usize)> {
    // Slack absorbs only the representation error of 100 * target.
    let threshold = 100.0 * target_power - 1e-9;
    let qualifying: Vec<(usize, usize)> = table
        .rows
        .iter()
        .filter(|r| r.power_pct >= threshold)
        .map(|r| (r.n, r.m))
        .collect();
    let mut frontier: Vec<(usize, usize)> = qualifying
        .iter()
        .copied()
        .filter(|&(n, m)| {
            !qualifying
                .iter()
                .any(|&(n2, m2)| n2 <= n && m2 <= m && (n2, m2) != (n, m))
        })
        .collect();
    frontier.sort_unstable();
    frontier
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(usize, usize, f64)]) -> PowerTable {
        PowerTable {
            rows: rows
                .iter()
                .map(|&(n, m, p)| PowerRow {
                    n,
                    m,
                    total_animals: 2 * n * m,
                    power_pct: p,
                    convergence_pct: 100.0,
                    censoring_pct: None,
                })
                .collect(),
        }
    }

    #[test]
    fn frontier_extremes() {
        let full = table(&[(3, 2, 100.0), (3, 3, 100.0), (4, 2, 100.0), (4, 3, 100.0)]);
        assert_eq!(minimal_designs(&full, 0.8), vec![(3, 2)]);
        let none = table(&[(3, 2, 0.0), (3, 3, 0.0), (4, 2, 0.0)]);
        assert!(minimal_designs(&none, 0.8).is_empty());
    }

    #[test]
    fn exact_threshold_counts() {
        let t = table(&[(3, 2, 80.0), (3, 3, 79.99)]);
        assert_eq!(minimal_designs(&t, 0.8), vec![(3, 2)]);
    }

    #[test]
    fn summary_counts() {
        let o = |rejected, converged, c| ReplicateOutcome {
            rejected,
            converged,
            censoring_fraction: Some(c),
        };
        let row = summarize_cell(
            3,
            2,
            &[
                o(true, true, 0.25),
                o(false, true, 0.0),
                o(false, false, 0.5),
                o(true, true, 0.25),
            ],
        );
        assert_eq!(row.total_animals, 12);
        assert!((row.power_pct - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(row.convergence_pct, 75.0);
        assert_eq!(row.censoring_pct, Some(25.0));
    }

    #[test]
    fn invalid_jobs_rejected() {
        let grid = DesignGrid::new(vec![3], vec![2], 1).with_sim(10);
        let model = OutcomeModel::Anova(AnovaParams {
            beta0: 0.0,
            beta: 0.5,
            tau2: 0.1,
            sigma2: 1.0,
        });
        let job = PowerJob::new(grid.clone(), model);
        assert!(job
            .clone()
            .with_workers(Workers::Fixed(0))
            .validate()
            .is_err());
        assert!(job.clone().with_target_power(0.0).validate().is_err());
        let bad = PowerJob::new(grid.with_alpha(1.5), model);
        assert!(run_power_grid(&bad).is_err());
    }
}
