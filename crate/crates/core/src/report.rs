//! Plain-text rendering of power reports.

use std::fmt::Write;

use crate::io::{ParamSource, PowerReport};
use crate::power::OutcomeModel;

/// Shortest fixed-notation rendering with at most `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let rounded: f64 = sci.parse().unwrap_or(x);
    let exponent = rounded.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    trim_zeros(format!("{rounded:.decimals$}"))
}

/// Fixed notation with at most `decimals` decimals, trailing zeros removed.
pub fn format_decimals(x: f64, decimals: usize) -> String {
    trim_zeros(format!("{x:.decimals$}"))
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.into()
        }
    } else {
        s
    }
}

/// Parameter echo in the style of the interactive tool.
pub fn format_header(report: &PowerReport) -> String {
    let p = &report.params;
    let mut out = String::new();
    let pilot = matches!(p.source, ParamSource::Pilot { .. });
    // Pilot estimates are shown to 4 decimals, assumed values to 7 significant digits.
    let show = |x: f64| {
        if pilot {
            format_decimals(x, 4)
        } else {
            format_significant(x, 7)
        }
    };
    if let ParamSource::Pilot { path } = &p.source {
        let _ = writeln!(out, "Parameter estimates based on the pilot data ({path}):");
    }
    match p.model {
        OutcomeModel::Anova(a) => {
            let _ = writeln!(out, "Treatment effect (beta): {}", show(a.beta));
            let _ = writeln!(out, "Variance of random effect (tau2): {}", show(a.tau2));
            if !pilot {
                let _ = writeln!(
                    out,
                    "Intra-PDX correlation coefficient (icc): {}",
                    show(a.icc())
                );
            }
            let _ = writeln!(out, "Random error variance (sigma2): {}", show(a.sigma2));
        }
        OutcomeModel::Frailty(f) => {
            if pilot {
                let _ = writeln!(out, "Scale parameter (lambda): {}", show(f.lambda));
                let _ = writeln!(out, "Shape parameter (nu): {}", show(f.nu));
                let _ = writeln!(out, "Treatment effect (beta): {}", show(f.beta));
            } else {
                let _ = writeln!(out, "Treatment effect (beta): {}", show(f.beta));
                let _ = writeln!(out, "Scale parameter (lambda): {}", show(f.lambda));
                let _ = writeln!(out, "Shape parameter (nu): {}", show(f.nu));
            }
            let _ = writeln!(out, "Variance of random effect (tau2): {}", show(f.tau2));
            match f.censor_time {
                Some(ct) => {
                    let _ = writeln!(out, "Censoring time (Ct): {}", format_significant(ct, 7));
                }
                None => {
                    let _ = writeln!(out, "Censoring: none");
                }
            }
        }
    }
    let _ = writeln!(
        out,
        "Monte Carlo replicates: {}, alpha: {}, seed: {}",
        p.sim,
        format_significant(p.alpha, 7),
        report.seed
    );
    out
}

/// The per-cell table: n, m, N, Power(%) and, for censored runs, Censoring Rate(%).
pub fn format_table(report: &PowerReport) -> String {
    let table = report.table();
    let censored = table.has_censoring();
    let mut out = String::new();
    let _ = write!(out, "{:>4} {:>3} {:>5} {:>9}", "n", "m", "N", "Power(%)");
    if censored {
        let _ = write!(out, " {:>18}", "Censoring Rate(%)");
    }
    out.push('\n');
    for r in &table.rows {
        let _ = write!(
            out,
            "{:>4} {:>3} {:>5} {:>9.1}",
            r.n, r.m, r.total_animals, r.power_pct
        );
        if let Some(c) = r.censoring_pct {
            let _ = write!(out, " {:>18.2}", c);
        }
        out.push('\n');
    }
    out
}

pub fn format_frontier(report: &PowerReport) -> String {
    let pct = format_significant(100.0 * report.params.target_power, 7);
    if report.frontier.is_empty() {
        return format!("No design in the grid reaches {pct}% power; consider larger n or m.\n");
    }
    let designs: Vec<String> = report
        .frontier
        .iter()
        .map(|(n, m)| format!("(n = {n}, m = {m}, N = {})", 2 * n * m))
        .collect();
    format!(
        "Minimal designs reaching {pct}% power:\n  {}\n",
        designs.join("\n  ")
    )
}

pub fn format_report(report: &PowerReport) -> String {
    format!(
        "{}\n{}\n{}",
        format_header(report),
        format_table(report),
        format_frontier(report)
    )
}
