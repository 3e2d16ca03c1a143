use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pdxpow_core::elicit::{DEFAULT_ICC, DEFAULT_NU, DEFAULT_SIGMA2, DEFAULT_TAU2};
use pdxpow_core::power::DEFAULT_TARGET_POWER;
use pdxpow_core::DesignGrid;

/// Monte Carlo power analysis for PDX experiments with n lines and m animals per arm.
#[derive(Debug, Parser)]
#[command(name = "pdxpow", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::enum_variant_names)]
pub enum Command {
    /// Log-normal mixed-model power from assumed median survival times.
    PowAnova {
        #[command(flatten)]
        medians: Medians,
        /// Intra-line correlation tau2 / (tau2 + sigma2).
        #[arg(long, default_value_t = DEFAULT_ICC)]
        icc: f64,
        /// Within-line variance of log survival.
        #[arg(long, default_value_t = DEFAULT_SIGMA2)]
        sigma2: f64,
        #[command(flatten)]
        anova: AnovaOptions,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Weibull frailty-model power from assumed median survival times.
    PowFrailty {
        #[command(flatten)]
        medians: Medians,
        /// Weibull shape.
        #[arg(long, default_value_t = DEFAULT_NU)]
        nu: f64,
        /// Variance of the normal line frailty.
        #[arg(long, default_value_t = DEFAULT_TAU2)]
        tau2: f64,
        #[command(flatten)]
        censoring: Censoring,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Mixed-model power with parameters estimated from uncensored pilot data.
    PowAnovaData {
        #[command(flatten)]
        data: DataFile,
        #[command(flatten)]
        anova: AnovaOptions,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Frailty-model power with parameters estimated from censored pilot data.
    PowFrailtyData {
        #[command(flatten)]
        data: DataFile,
        #[command(flatten)]
        censoring: Censoring,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Debug, Args)]
pub struct Medians {
    /// Median survival time in the control arm.
    #[arg(long)]
    pub ctl_med: f64,
    /// Median survival time in the treated arm.
    #[arg(long)]
    pub tx_med: f64,
}

#[derive(Debug, Args)]
pub struct DataFile {
    /// Pilot CSV with columns ID, Y, Tx and, for frailty, status.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct Censoring {
    /// Administrative censoring time of the planned experiment; no censoring if absent.
    #[arg(long)]
    pub censor_time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnovaOptions {
    /// Use a normal instead of a Student-t reference for the Wald test.
    #[arg(long)]
    pub z_test: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Numbers of PDX lines: a range A:B or a list like 3,5,8.
    #[arg(long, default_value = "3:10", value_parser = parse_counts)]
    pub n: Counts,
    /// Animals per arm per line: a range A:B or a list.
    #[arg(long, default_value = "2:8", value_parser = parse_counts)]
    pub m: Counts,
    /// Monte Carlo replicates per design.
    #[arg(long, default_value_t = DesignGrid::DEFAULT_SIM)]
    pub sim: usize,
    /// Significance level of the Wald test.
    #[arg(long, default_value_t = DesignGrid::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; all cores if unset.
    #[arg(long, env = "PDXPOW_THREADS")]
    pub threads: Option<usize>,
    /// Power the minimal designs must reach.
    #[arg(long, default_value_t = DEFAULT_TARGET_POWER)]
    pub target_power: f64,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write power curves as SVG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Power axis limits of the plot, as LO:HI proportions.
    #[arg(long, default_value = "0:1", value_parser = parse_limits)]
    pub plot_ylim: (f64, f64),
}

/// A grid axis. Wrapped so clap parses the whole list from one argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts(pub Vec<usize>);

fn parse_counts(s: &str) -> Result<Counts, String> {
    let number = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("{t:?} is not a non-negative integer"))
    };
    if let Some((a, b)) = s.split_once(':') {
        let (a, b) = (number(a)?, number(b)?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        Ok(Counts((a..=b).collect()))
    } else {
        s.split(',')
            .map(number)
            .collect::<Result<_, _>>()
            .map(Counts)
    }
}

fn parse_limits(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("{t:?} is not a number"))
    };
    Ok((parse(a)?, parse(b)?))
}
