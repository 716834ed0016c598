//! On-disk formats for models, traces, reports, sweeps and similarity dumps.

use std::io::{Read, Write};
use std::path::Path;

use fairsurv_core::eval::FoldReport;
use fairsurv_core::{CoxModel, EvalReport, FeatureScaler, MetricSet, SimilarityKind, SimilarityMatrix, StepFunction, TrainTrace};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{write_atomic, write_string};

/// `{beta, baseline: [[t, H0], ...], scaler: {center, scale}}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub beta: Vec<f64>,
    pub baseline: Vec<(f64, f64)>,
    pub scaler: Option<FeatureScaler>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_names: Vec<String>,
}

impl ModelFile {
    pub fn from_model(model: &CoxModel, feature_names: &[String]) -> Self {
        Self {
            beta: model.beta.clone(),
            baseline: model.baseline.points.clone(),
            scaler: model.scaler.clone(),
            feature_names: feature_names.to_vec(),
        }
    }

    pub fn into_model(self) -> CoxModel {
        CoxModel {
            beta: self.beta,
            baseline: StepFunction::new(0.0, self.baseline),
            scaler: self.scaler,
        }
    }
}

pub fn save_model(path: &Path, model: &CoxModel, feature_names: &[String]) -> Result<()> {
    let json = serde_json::to_string_pretty(&ModelFile::from_model(model, feature_names))
        .map_err(|e| CliError::format(path, e))?;
    write_string(path, &(json + "\n"))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
    if let Some(s) = &file.scaler {
        if s.dim() != file.beta.len() {
            return Err(CliError::format(path, "scaler and beta have different lengths"));
        }
    }
    Ok(file)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_csv(trace: &TrainTrace) -> String {
    let mut out = String::from("epoch,utility,surrogate,fndcg,grad_norm\n");
    for e in &trace.epochs {
        out += &format!(
            "{},{},{},{},{}\n",
            e.epoch,
            e.utility,
            opt(e.surrogate),
            opt(e.fndcg),
            e.grad_norm
        );
    }
    out
}

pub fn metric_header(k: usize) -> [String; 4] {
    [format!("FNDCG@{k}%"), "C-index%".into(), "Brier%".into(), "tAUC%".into()]
}

fn metric_cells(m: &MetricSet) -> String {
    m.values().iter().map(|v| opt(*v)).collect::<Vec<_>>().join(",")
}

/// One row per fold, then a `mean` row. Skipped folds have empty cells.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = format!("fold,{}\n", metric_header(report.k).join(","));
    for f in &report.folds {
        let cells = if f.skipped {
            ",,,".to_string()
        } else {
            metric_cells(&f.metrics)
        };
        out += &format!("{},{}\n", f.fold, cells);
    }
    out += &format!("mean,{}\n", metric_cells(&report.mean));
    out
}

pub fn write_report(dir_json: &Path, dir_csv: &Path, report: &EvalReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::format(dir_json, e))?;
    write_string(dir_json, &(json + "\n"))?;
    write_string(dir_csv, &report_csv(report))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

/// Paired per-fold table for two variants evaluated on the same folds.
pub fn comparison_csv(a: &EvalReport, b: &EvalReport) -> String {
    let mut out = format!("fold,variant,{}\n", metric_header(a.k).join(","));
    let row = |f: &FoldReport, v: &str| {
        let cells = if f.skipped { ",,,".into() } else { metric_cells(&f.metrics) };
        format!("{},{},{}\n", f.fold, v, cells)
    };
    for (fa, fb) in a.folds.iter().zip(&b.folds) {
        out += &row(fa, &a.variant);
        out += &row(fb, &b.variant);
    }
    out += &format!("mean,{},{}\n", a.variant, metric_cells(&a.mean));
    out += &format!("mean,{},{}\n", b.variant, metric_cells(&b.mean));
    out
}

pub const SWEEP_HEADER: &str = "variant,gamma,k,fold,metric,value\n";

/// Long-format rows for one evaluated (gamma, k, fold) cell.
pub fn sweep_rows(variant: &str, gamma: f64, k: usize, fold: usize, m: &MetricSet) -> String {
    MetricSet::NAMES
        .iter()
        .zip(m.values())
        .map(|(name, v)| format!("{variant},{gamma},{k},{fold},{name},{}\n", opt(v)))
        .collect()
}

const SIM_MAGIC: &[u8; 4] = b"FSIM";

/// Header: magic `FSIM`, `u64` n, `u8` kind (0 input, 1 output), then n*n
/// row-major `f64`, all little-endian. Debugging aid, not a stable format.
pub fn write_similarity(path: &Path, sim: &SimilarityMatrix) -> Result<()> {
    write_atomic(path, |f| {
        let mut w = std::io::BufWriter::new(f);
        w.write_all(SIM_MAGIC)?;
        w.write_all(&(sim.n() as u64).to_le_bytes())?;
        w.write_all(&[match sim.kind() {
            SimilarityKind::Input => 0u8,
            SimilarityKind::Output => 1u8,
        }])?;
        for v in sim.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })
}

pub fn read_similarity(path: &Path) -> Result<SimilarityMatrix> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CliError::io(path, e))?;
    if buf.len() < 13 || &buf[..4] != SIM_MAGIC {
        return Err(CliError::format(path, "not a similarity file"));
    }
    let n = u64::from_le_bytes(buf[4..12].try_into().unwrap()) as usize;
    let kind = match buf[12] {
        0 => SimilarityKind::Input,
        1 => SimilarityKind::Output,
        k => return Err(CliError::format(path, format!("unknown similarity kind {k}"))),
    };
    let body = &buf[13..];
    if body.len() != n * n * 8 {
        return Err(CliError::format(path, "truncated similarity file"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    SimilarityMatrix::from_vec(n, kind, values).map_err(|e| CliError::format(path, e))
}
