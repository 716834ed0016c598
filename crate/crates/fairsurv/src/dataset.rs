//! CSV ingestion and export.
//!
//! A header row is required. The schema names the time and event columns;
//! features are either listed explicitly or taken to be every other column
//! in file order. Missing cells are an error, never imputed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use fairsurv_core::{SurvivalDataset, SurvivalRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub time: String,
    pub event: String,
    /// `None`: all remaining columns
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

impl Schema {
    pub fn new(time: &str, event: &str) -> Self {
        Self {
            time: time.into(),
            event: event.into(),
            features: None,
        }
    }
}

impl Default for Schema {
    fn default() -> Self {
        Self::new("time", "event")
    }
}

/// Column layouts of the four benchmark datasets as commonly distributed.
/// All covariates must already be numeric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// week, arrest, then covariates (fin, age, race, wexp, mar, paro, prio, ...)
    Rossi,
    /// duration, event, then encoded covariates
    Compas,
    /// duration, event, then encoded covariates
    Kkbox,
    /// duration, event, then x0..x13
    Support,
}

impl Preset {
    pub fn schema(self) -> Schema {
        match self {
            Preset::Rossi => Schema::new("week", "arrest"),
            Preset::Compas | Preset::Kkbox | Preset::Support => Schema::new("duration", "event"),
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rossi" => Ok(Preset::Rossi),
            "compas" => Ok(Preset::Compas),
            "kkbox" => Ok(Preset::Kkbox),
            "support" => Ok(Preset::Support),
            other => Err(CliError::Usage(format!("unknown dataset preset `{other}`"))),
        }
    }
}

fn column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::MissingColumn {
            path: path.to_path_buf(),
            column: name.into(),
        })
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<SurvivalDataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(file, path, schema)
}

/// Parses CSV from any reader; `path` only labels errors.
pub fn read_csv<R: std::io::Read>(reader: R, path: &Path, schema: &Schema) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::format(path, e))?
        .clone();
    let time_col = column(path, &headers, &schema.time)?;
    let event_col = column(path, &headers, &schema.event)?;
    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names
            .iter()
            .map(|n| column(path, &headers, n))
            .collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| c != time_col && c != event_col)
            .collect(),
    };
    let names: Vec<String> = feature_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| CliError::Row {
            path: path.to_path_buf(),
            row: row_no,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |c: usize| -> Result<f64> {
            let bad = |message: String| CliError::Row {
                path: path.to_path_buf(),
                row: row_no,
                column: headers[c].to_string(),
                message,
            };
            let raw = row.get(c).unwrap_or("");
            if raw.is_empty() {
                return Err(bad("missing value".into()));
            }
            let v: f64 = raw.parse().map_err(|_| bad(format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("`{raw}` is not finite")));
            }
            Ok(v)
        };
        let time = cell(time_col)?;
        if time <= 0.0 {
            return Err(CliError::Row {
                path: path.to_path_buf(),
                row: row_no,
                column: schema.time.clone(),
                message: format!("time must be positive, got {time}"),
            });
        }
        let event = match cell(event_col)? {
            0.0 => false,
            1.0 => true,
            v => {
                return Err(CliError::Row {
                    path: path.to_path_buf(),
                    row: row_no,
                    column: schema.event.clone(),
                    message: format!("event must be 0 or 1, got {v}"),
                })
            }
        };
        let features = feature_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?;
        records.push(SurvivalRecord::new(features, time, event));
    }
    SurvivalDataset::new(records, names).map_err(|e| CliError::format(path, e))
}

/// Writes features (named as in the dataset), then `time`, then `event`
/// as 0/1. Floats use the shortest representation that reads back exactly.
pub fn save_csv(path: &Path, data: &SurvivalDataset) -> Result<()> {
    crate::output::write_atomic(path, |w| write_csv(w, data))
}

pub fn write_csv<W: Write>(w: W, data: &SurvivalDataset) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(BufWriter::new(w));
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.extend(["time", "event"]);
    wtr.write_record(&header)?;
    for r in data.records() {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        row.push(r.time.to_string());
        row.push(if r.event { "1" } else { "0" }.into());
        wtr.write_record(&row)?;
    }
    wtr.flush()
}

/// Schema matching what [`save_csv`] writes.
pub fn saved_schema() -> Schema {
    Schema::default()
}

pub fn describe(path: &Path, data: &SurvivalDataset) -> String {
    format!(
        "{}: n={} p={} events={} censored={}",
        path.display(),
        data.n(),
        data.p(),
        data.n_events(),
        data.n_censored()
    )
}
