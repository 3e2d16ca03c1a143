//! Pilot-data ingestion and power-table serialisation.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmm::WaldReference;
use crate::model::DesignGrid;
use crate::model::{PilotDataset, PilotRow, PowerRow, PowerTable};
use crate::power::{minimal_designs, OutcomeModel, PowerJob, Workers};

fn parse_flag(field: &str, value: &str, row: usize) -> Result<bool> {
    match value.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Data(format!(
            "{field} must be 0 or 1 at row {row} (got {other:?})"
        ))),
    }
}

/// Parses pilot data in the `ID,Y,Tx[,status]` layout (header names are case-insensitive).
pub fn parse_pilot_csv<R: Read>(reader: R) -> Result<PilotDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing = |name: &str| Error::Data(format!("missing column {name}"));
    let id_col = column("ID").ok_or_else(|| missing("ID"))?;
    let y_col = column("Y").ok_or_else(|| missing("Y"))?;
    let tx_col = column("Tx").ok_or_else(|| missing("Tx"))?;
    let status_col = column("status");

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Data(format!("malformed CSV at row {row}: {e}")))?;
        let field = |col: usize, name: &str| {
            record
                .get(col)
                .ok_or_else(|| Error::Data(format!("missing {name} at row {row}")))
        };
        let id = field(id_col, "ID")?.to_string();
        if id.is_empty() {
            return Err(Error::Data(format!("empty ID at row {row}")));
        }
        let y_text = field(y_col, "Y")?;
        let y: f64 = y_text
            .parse()
            .map_err(|_| Error::Data(format!("Y is not a number at row {row} (got {y_text:?})")))?;
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Data(format!("Y must be positive at row {row}")));
        }
        let treated = parse_flag("Tx", field(tx_col, "Tx")?, row)?;
        let status = match status_col {
            Some(col) => Some(parse_flag("status", field(col, "status")?, row)?),
            None => None,
        };
        rows.push(PilotRow {
            id,
            y,
            treated,
            status,
        });
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    PilotDataset::new(rows)
}

pub fn read_pilot_csv(path: impl AsRef<Path>) -> Result<PilotDataset> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_pilot_csv(file)
}

/// Writes `n,m,N,power_pct,convergence_pct[,censoring_pct]` at full precision.
pub fn write_table_csv<W: Write>(table: &PowerTable, mut out: W) -> Result<()> {
    let censored = table.has_censoring();
    write!(out, "n,m,N,power_pct,convergence_pct")?;
    if censored {
        write!(out, ",censoring_pct")?;
    }
    writeln!(out)?;
    for r in &table.rows {
        write!(
            out,
            "{},{},{},{},{}",
            r.n, r.m, r.total_animals, r.power_pct, r.convergence_pct
        )?;
        if censored {
            write!(out, ",{}", r.censoring_pct.unwrap_or(f64::NAN))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn table_to_csv_string(table: &PowerTable) -> String {
    let mut buf = Vec::new();
    write_table_csv(table, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

pub fn read_table_csv<R: Read>(reader: R) -> Result<PowerTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let expected = ["n", "m", "N", "power_pct", "convergence_pct"];
    let censored = match headers.len() {
        5 => false,
        6 if &headers[5] == "censoring_pct" => true,
        _ => {
            return Err(Error::Data(format!(
                "unexpected power table header {headers:?}"
            )))
        }
    };
    if headers.iter().take(5).ne(expected) {
        return Err(Error::Data(format!(
            "unexpected power table header {headers:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Data(format!("malformed CSV at row {row}: {e}")))?;
        let bad = |col: &str| Error::Data(format!("invalid {col} at row {row}"));
        let int = |k: usize| record[k].parse::<usize>().map_err(|_| bad(expected[k]));
        let real = |k: usize, name: &str| record[k].parse::<f64>().map_err(|_| bad(name));
        rows.push(PowerRow {
            n: int(0)?,
            m: int(1)?,
            total_animals: int(2)?,
            power_pct: real(3, "power_pct")?,
            convergence_pct: real(4, "convergence_pct")?,
            censoring_pct: if censored {
                Some(real(5, "censoring_pct")?)
            } else {
                None
            },
        });
    }
    Ok(PowerTable { rows })
}

/// How the simulation parameters were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "lowercase")]
pub enum ParamSource {
    Pilot { path: String },
    Medians { ctl_med: f64, tx_med: f64 },
}

/// Everything needed to reproduce a power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub model: OutcomeModel,
    pub source: ParamSource,
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub sim: usize,
    pub alpha: f64,
    pub target_power: f64,
    /// `"t"` or `"normal"`; only meaningful for the ANOVA model.
    pub wald_reference: String,
}

/// A power table with the parameters that generated it and its frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub params: ReportParams,
    pub rows: Vec<PowerRow>,
    pub frontier: Vec<(usize, usize)>,
    pub seed: u64,
}

fn reference_name(r: WaldReference) -> &'static str {
    match r {
        WaldReference::StudentT => "t",
        WaldReference::Normal => "normal",
    }
}

impl PowerReport {
    pub fn new(job: &PowerJob, source: ParamSource, table: PowerTable) -> Self {
        let frontier = minimal_designs(&table, job.target_power);
        PowerReport {
            params: ReportParams {
                model: job.model,
                source,
                n_values: job.grid.n_values.clone(),
                m_values: job.grid.m_values.clone(),
                sim: job.grid.sim,
                alpha: job.grid.alpha,
                target_power: job.target_power,
                wald_reference: reference_name(job.anova_reference).into(),
            },
            rows: table.rows,
            frontier,
            seed: job.grid.seed,
        }
    }

    pub fn table(&self) -> PowerTable {
        PowerTable {
            rows: self.rows.clone(),
        }
    }

    /// The job that regenerates this report's table.
    pub fn job(&self) -> Result<PowerJob> {
        let p = &self.params;
        let anova_reference = match p.wald_reference.as_str() {
            "t" => WaldReference::StudentT,
            "normal" => WaldReference::Normal,
            other => return Err(Error::Data(format!("unknown Wald reference {other:?}"))),
        };
        let grid = DesignGrid {
            n_values: p.n_values.clone(),
            m_values: p.m_values.clone(),
            sim: p.sim,
            alpha: p.alpha,
            seed: self.seed,
        };
        PowerJob {
            grid,
            model: p.model,
            target_power: p.target_power,
            workers: Workers::Auto,
            anova_reference,
        }
        .validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
