mod args;

use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Mutex;

use clap::Parser;
use pdxpow_core::elicit::{
    elicit_anova_from_medians, elicit_anova_from_pilot, elicit_frailty_from_medians,
    elicit_frailty_from_pilot,
};
use pdxpow_core::io::write_table_csv;
use pdxpow_core::power::{convergence_warnings, run_power_grid_with_progress};
use pdxpow_core::report::format_report;
use pdxpow_core::{
    read_pilot_csv, render_power_plot, DesignGrid, Error, OutcomeModel, ParamSource, PowerJob,
    PowerReport, WaldReference, Workers,
};

use args::{Cli, Command, GridArgs};

/// Failure classes with distinct exit codes.
enum Failure {
    Usage(Error),
    Data(Error),
    Engine(Error),
    Output(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Engine(_) => 4,
            Failure::Output(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Engine(e) => write!(f, "{e}"),
            Failure::Output(msg) => f.write_str(msg),
        }
    }
}

/// Invalid-argument errors are usage errors wherever they surface.
fn classify(e: Error, otherwise: fn(Error) -> Failure) -> Failure {
    match e {
        Error::Invalid { .. } => Failure::Usage(e),
        e => otherwise(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let (model, source, grid, reference) = match command {
        Command::PowAnova {
            medians,
            icc,
            sigma2,
            anova,
            grid,
        } => {
            let p = elicit_anova_from_medians(medians.ctl_med, medians.tx_med, icc, sigma2)
                .map_err(|e| classify(e, Failure::Usage))?;
            let source = ParamSource::Medians {
                ctl_med: medians.ctl_med,
                tx_med: medians.tx_med,
            };
            (
                OutcomeModel::Anova(p),
                source,
                grid,
                reference(anova.z_test),
            )
        }
        Command::PowFrailty {
            medians,
            nu,
            tau2,
            censoring,
            grid,
        } => {
            let p = elicit_frailty_from_medians(medians.ctl_med, medians.tx_med, nu, tau2)
                .map_err(|e| classify(e, Failure::Usage))?
                .with_censor_time(censoring.censor_time);
            let source = ParamSource::Medians {
                ctl_med: medians.ctl_med,
                tx_med: medians.tx_med,
            };
            (
                OutcomeModel::Frailty(p),
                source,
                grid,
                WaldReference::StudentT,
            )
        }
        Command::PowAnovaData { data, anova, grid } => {
            let pilot = read_pilot_csv(&data.data).map_err(Failure::Data)?;
            let p = elicit_anova_from_pilot(&pilot).map_err(Failure::Data)?;
            (
                OutcomeModel::Anova(p),
                pilot_source(&data.data),
                grid,
                reference(anova.z_test),
            )
        }
        Command::PowFrailtyData {
            data,
            censoring,
            grid,
        } => {
            let pilot = read_pilot_csv(&data.data).map_err(Failure::Data)?;
            let p = elicit_frailty_from_pilot(&pilot)
                .map_err(Failure::Data)?
                .with_censor_time(censoring.censor_time);
            (
                OutcomeModel::Frailty(p),
                pilot_source(&data.data),
                grid,
                WaldReference::StudentT,
            )
        }
    };
    execute(model, source, grid, reference)
}

fn reference(z_test: bool) -> WaldReference {
    if z_test {
        WaldReference::Normal
    } else {
        WaldReference::StudentT
    }
}

fn pilot_source(path: &Path) -> ParamSource {
    ParamSource::Pilot {
        path: path.display().to_string(),
    }
}

fn execute(
    model: OutcomeModel,
    source: ParamSource,
    args: GridArgs,
    reference: WaldReference,
) -> Result<(), Failure> {
    let grid = DesignGrid::new(args.n.0, args.m.0, args.seed)
        .with_sim(args.sim)
        .with_alpha(args.alpha);
    let mut job = PowerJob::new(grid, model).with_target_power(args.target_power);
    job.anova_reference = reference;
    if let Some(k) = args.threads {
        job = job.with_workers(Workers::Fixed(k));
    }
    let job = job.validate().map_err(Failure::Usage)?;
    // Validate the plot limits before spending time on the grid.
    let (lo, hi) = args.plot_ylim;
    if args.plot.is_some() && !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Failure::Usage(Error::Invalid {
            field: "plot_ylim",
            reason: "plot limits must satisfy 0 <= LO < HI <= 1".into(),
        }));
    }

    let interactive = io::stderr().is_terminal();
    let stderr = Mutex::new(io::stderr());
    let table = run_power_grid_with_progress(&job, |p| {
        if interactive {
            let mut err = stderr.lock().unwrap_or_else(|e| e.into_inner());
            let _ = write!(err, "\rcells completed: {}/{}", p.completed, p.total);
            let _ = err.flush();
        }
    })
    .map_err(|e| classify(e, Failure::Engine))?;
    if interactive {
        eprintln!();
    }
    for warning in convergence_warnings(&table) {
        eprintln!("warning: {warning}");
    }

    let report = PowerReport::new(&job, source, table);
    print!("{}", format_report(&report));

    if let Some(path) = &args.out_csv {
        let file = fs::File::create(path).map_err(|e| output_error(path, e))?;
        write_table_csv(&report.table(), io::BufWriter::new(file))
            .map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.out_json {
        let json = report.to_json().map_err(Failure::Engine)?;
        fs::write(path, json + "\n").map_err(|e| output_error(path, e))?;
    }
    if let Some(path) = &args.plot {
        let svg = render_power_plot(&report.table(), job.target_power, (lo, hi))
            .map_err(Failure::Usage)?;
        fs::write(path, svg).map_err(|e| output_error(path, e))?;
    }
    Ok(())
}

fn output_error(path: &Path, e: io::Error) -> Failure {
    Failure::Output(format!("cannot write {}: {e}", path.display()))
}
