//! Shared domain types: design grid, model parameters, datasets and power tables.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The (n, m) search space of a power study together with its Monte Carlo settings.
///
/// `n_values` are PDX line counts, `m_values` are animals per line per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignGrid {
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub sim: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl DesignGrid {
    pub const DEFAULT_SIM: usize = 500;
    pub const DEFAULT_ALPHA: f64 = 0.05;

    /// Grid with the default replicate count and significance level.
    pub fn new(n_values: Vec<usize>, m_values: Vec<usize>, seed: u64) -> Self {
        DesignGrid {
            n_values,
            m_values,
            sim: Self::DEFAULT_SIM,
            alpha: Self::DEFAULT_ALPHA,
            seed,
        }
    }

    pub fn with_sim(mut self, sim: usize) -> Self {
        self.sim = sim;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Cells in table order: ascending n, then ascending m.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.n_values
            .iter()
            .flat_map(move |&n| self.m_values.iter().map(move |&m| (n, m)))
    }

    pub fn cell_count(&self) -> usize {
        self.n_values.len() * self.m_values.len()
    }
}

fn strictly_ascending(values: &[usize]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

/// Checks every [`DesignGrid`] invariant and hands the grid back unchanged.
pub fn validate_grid(grid: DesignGrid) -> Result<DesignGrid> {
    if grid.n_values.is_empty() {
        return Err(Error::invalid("n_values", "n_values must not be empty"));
    }
    if grid.m_values.is_empty() {
        return Err(Error::invalid("m_values", "m_values must not be empty"));
    }
    if let Some(&n) = grid.n_values.iter().find(|&&n| n < 2) {
        return Err(Error::invalid(
            "n_values",
            format!("n_values must all be at least 2 (got {n})"),
        ));
    }
    if let Some(&m) = grid.m_values.iter().find(|&&m| m < 1) {
        return Err(Error::invalid(
            "m_values",
            format!("m_values must all be at least 1 (got {m})"),
        ));
    }
    if !strictly_ascending(&grid.n_values) {
        return Err(Error::invalid(
            "n_values",
            "n_values must be ascending and free of duplicates",
        ));
    }
    if !strictly_ascending(&grid.m_values) {
        return Err(Error::invalid(
            "m_values",
            "m_values must be ascending and free of duplicates",
        ));
    }
    if grid.sim < 1 {
        return Err(Error::invalid("sim", "sim must be at least 1"));
    }
    if !(grid.alpha > 0.0 && grid.alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            "alpha must lie strictly between 0 and 1",
        ));
    }
    Ok(grid)
}

/// Parameters of the log-normal mixed-effects ANOVA outcome model
/// `log Y = beta0 + tx * beta + a_line + e`, `a_line ~ N(0, tau2)`, `e ~ N(0, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaParams {
    pub beta0: f64,
    pub beta: f64,
    pub tau2: f64,
    pub sigma2: f64,
}

impl AnovaParams {
    pub fn new(beta0: f64, beta: f64, tau2: f64, sigma2: f64) -> Result<Self> {
        AnovaParams {
            beta0,
            beta,
            tau2,
            sigma2,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        if !self.beta0.is_finite() {
            return Err(Error::invalid("beta0", "beta0 must be finite"));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta", "beta must be finite"));
        }
        if !(self.tau2 >= 0.0 && self.tau2.is_finite()) {
            return Err(Error::invalid(
                "tau2",
                "tau2 must be finite and nonnegative",
            ));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(
                "sigma2",
                "sigma2 must be finite and positive",
            ));
        }
        Ok(self)
    }

    /// Intra-line correlation `tau2 / (tau2 + sigma2)`.
    pub fn icc(&self) -> f64 {
        self.tau2 / (self.tau2 + self.sigma2)
    }
}

/// Parameters of the Weibull proportional-hazards model with a normal line frailty.
///
/// Hazard is `lambda * nu * t^(nu-1) * exp(tx * beta + a_line)` with `a_line ~ N(0, tau2)`.
/// `censor_time` switches on administrative (type I) censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrailtyParams {
    pub lambda: f64,
    pub nu: f64,
    pub beta: f64,
    pub tau2: f64,
    pub censor_time: Option<f64>,
}

impl FrailtyParams {
    pub fn new(
        lambda: f64,
        nu: f64,
        beta: f64,
        tau2: f64,
        censor_time: Option<f64>,
    ) -> Result<Self> {
        FrailtyParams {
            lambda,
            nu,
            beta,
            tau2,
            censor_time,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(
                "lambda",
                "lambda must be finite and positive",
            ));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid("nu", "nu must be finite and positive"));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta", "beta must be finite"));
        }
        if !(self.tau2 >= 0.0 && self.tau2.is_finite()) {
            return Err(Error::invalid(
                "tau2",
                "tau2 must be finite and nonnegative",
            ));
        }
        if let Some(ct) = self.censor_time {
            // +inf is accepted: it is the no-censoring limit.
            if !(ct > 0.0) {
                return Err(Error::invalid(
                    "censor_time",
                    "censor time must be positive",
                ));
            }
        }
        Ok(self)
    }

    pub fn censor(&self) -> bool {
        self.censor_time.is_some()
    }

    pub fn with_censor_time(mut self, ct: Option<f64>) -> Self {
        self.censor_time = ct;
        self
    }
}

/// One animal: its line, arm, observed outcome and event indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    /// Zero-based line index.
    pub line: usize,
    pub treated: bool,
    pub y: f64,
    /// `false` means right-censored at `y`.
    pub event: bool,
}

/// Per-animal data grouped by line, the common input to both model fits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_lines: usize,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn censored_count(&self) -> usize {
        self.records.iter().filter(|r| !r.event).count()
    }

    pub fn censoring_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.censored_count() as f64 / self.records.len() as f64
        }
    }

    pub fn events_in_arm(&self, treated: bool) -> usize {
        self.records
            .iter()
            .filter(|r| r.treated == treated && r.event)
            .count()
    }

    /// Copy with the treatment coding flipped.
    pub fn swap_arms(&self) -> Dataset {
        Dataset {
            n_lines: self.n_lines,
            records: self
                .records
                .iter()
                .map(|r| Record {
                    treated: !r.treated,
                    ..*r
                })
                .collect(),
        }
    }

    /// Copy with every outcome multiplied by `c`.
    pub fn scale_outcomes(&self, c: f64) -> Dataset {
        Dataset {
            n_lines: self.n_lines,
            records: self
                .records
                .iter()
                .map(|r| Record { y: r.y * c, ..*r })
                .collect(),
        }
    }
}

/// A row of pilot data as read from the `ID,Y,Tx[,status]` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotRow {
    pub id: String,
    pub y: f64,
    pub treated: bool,
    pub status: Option<bool>,
}

/// Pilot (preliminary) data. Line identifiers are opaque labels compared by equality.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotDataset {
    rows: Vec<PilotRow>,
}

impl PilotDataset {
    pub fn new(rows: Vec<PilotRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("no data rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if !(row.y > 0.0 && row.y.is_finite()) {
                return Err(Error::Data(format!("Y must be positive at row {}", i + 1)));
            }
        }
        let with_status = rows.iter().filter(|r| r.status.is_some()).count();
        if with_status != 0 && with_status != rows.len() {
            return Err(Error::Data(
                "status must be given for every row or for none".into(),
            ));
        }
        let ds = PilotDataset { rows };
        if ds.line_ids().len() < 2 {
            return Err(Error::Data(
                "pilot data needs at least 2 distinct line IDs".into(),
            ));
        }
        if !ds.rows.iter().any(|r| r.treated) || !ds.rows.iter().any(|r| !r.treated) {
            return Err(Error::Data(
                "pilot data must contain both treatment arms".into(),
            ));
        }
        Ok(ds)
    }

    pub fn rows(&self) -> &[PilotRow] {
        &self.rows
    }

    pub fn has_status(&self) -> bool {
        self.rows.first().is_some_and(|r| r.status.is_some())
    }

    /// Distinct line ids in order of first appearance.
    pub fn line_ids(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.id.as_str()) {
                seen.push(r.id.as_str());
            }
        }
        seen
    }

    /// Converts to the indexed form used by the fits. Rows without status are events.
    pub fn to_dataset(&self) -> Dataset {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let records = self
            .rows
            .iter()
            .map(|r| {
                let next = index.len();
                let line = *index.entry(r.id.as_str()).or_insert(next);
                Record {
                    line,
                    treated: r.treated,
                    y: r.y,
                    event: r.status.unwrap_or(true),
                }
            })
            .collect();
        Dataset {
            n_lines: index.len(),
            records,
        }
    }
}

/// Tally of one Monte Carlo replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub rejected: bool,
    pub converged: bool,
    /// Fraction of censored animals in the generated data (censored model only).
    pub censoring_fraction: Option<f64>,
}

/// One (n, m) cell of a power table. Percentages are kept at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub total_animals: usize,
    #[serde(rename = "power")]
    pub power_pct: f64,
    #[serde(rename = "convergence")]
    pub convergence_pct: f64,
    #[serde(rename = "censoring", skip_serializing_if = "Option::is_none", default)]
    pub censoring_pct: Option<f64>,
}

impl PowerRow {
    /// Estimated power as a proportion in [0, 1].
    pub fn power(&self) -> f64 {
        self.power_pct / 100.0
    }
}

/// Estimated power for every cell of a design grid, ordered by n then m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn has_censoring(&self) -> bool {
        self.rows.iter().any(|r| r.censoring_pct.is_some())
    }

    pub fn get(&self, n: usize, m: usize) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.n == n && r.m == m)
    }

    /// Distinct n values in ascending order.
    pub fn n_values(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn m_values(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.m).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}
