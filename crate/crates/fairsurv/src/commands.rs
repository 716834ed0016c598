//! The five subcommands. Each takes a resolved [`ExperimentConfig`], writes
//! its files under the output layout and returns the paths it wrote.

use std::path::{Path, PathBuf};

use fairsurv_core::data::{kfold_split, FeatureScaler};
use fairsurv_core::eval::{evaluate, FoldReport};
use fairsurv_core::fairness::input_similarity;
use fairsurv_core::synth::{generate_planted_misalignment, generate_synthetic};
use fairsurv_core::train::{cell_config, fit, grid_cells, grid_row, run_fold, Variant};
use fairsurv_core::{EvalOptions, EvalReport, FoldAssignment, MetricSet, SurvivalDataset, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::dataset::{describe, load_csv, save_csv};
use crate::error::{CliError, Result};
use crate::formats::{
    comparison_csv, save_model, sweep_rows, trace_csv, write_report, write_similarity, SWEEP_HEADER,
};
use crate::output::{write_string, Layout};

pub const WORKERS_ENV: &str = "FAIRSURV_WORKERS";

fn stem(train: &TrainConfig) -> String {
    format!("{}-g{}-k{}-s{}", train.variant, train.gamma, train.k, train.seed)
}

fn load(cfg: &ExperimentConfig) -> Result<SurvivalDataset> {
    let path = cfg.data_path()?;
    let data = load_csv(path, &cfg.data.schema())?;
    log::info!("{}", describe(path, &data));
    Ok(data)
}

fn folds(cfg: &ExperimentConfig, data: &SurvivalDataset) -> Result<FoldAssignment> {
    kfold_split(data, cfg.eval.n_folds, cfg.train.seed).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// train on every fold but this one
    pub fold: Option<usize>,
    pub export_similarity: bool,
}

/// Trains one model and writes `models/<stem>.json` and `traces/<stem>.csv`.
pub fn cmd_fit(cfg: &ExperimentConfig, opts: &FitOptions) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load(cfg)?;
    let layout = Layout::new(&cfg.output);
    let (train, name) = match opts.fold {
        Some(f) => {
            let folds = folds(cfg, &data)?;
            if f >= folds.n_folds() {
                return Err(CliError::Usage(format!("fold {f} out of range 0..{}", folds.n_folds())));
            }
            (data.subset(&folds.train_indices(f))?, format!("{}-fold{f}", stem(&cfg.train)))
        }
        None => (data, stem(&cfg.train)),
    };
    let scaler = FeatureScaler::fit(&train)?;
    let scaled = scaler.apply(&train)?;
    let (mut model, trace) = fit(&scaled, &cfg.train)?;
    model.scaler = Some(scaler);

    let mut written = vec![layout.model(&name), layout.trace(&name)];
    save_model(&written[0], &model, train.feature_names())?;
    write_string(&written[1], &trace_csv(&trace))?;
    if opts.export_similarity {
        if scaled.n() > cfg.eval.subsample_cap {
            return Err(CliError::Usage(format!(
                "{} records exceed the subsample cap {}; not exporting a dense matrix",
                scaled.n(),
                cfg.eval.subsample_cap
            )));
        }
        let path = layout.report(&format!("{name}-input-similarity.bin"));
        write_similarity(&path, &input_similarity(&scaled))?;
        written.push(path);
    }
    Ok(written)
}

/// Cross-validates one configuration. Folds whose held-out part has no
/// events are skipped and noted.
pub fn cross_validate(
    data: &SurvivalDataset,
    folds: &FoldAssignment,
    train: &TrainConfig,
    eval: &EvalOptions,
) -> Result<EvalReport> {
    let mut reports = Vec::with_capacity(folds.n_folds());
    for fold in 0..folds.n_folds() {
        let test = folds.test_indices(fold);
        let n_test = test.len();
        let n_train = data.n() - n_test;
        if !test.iter().any(|&i| data.event(i)) {
            log::warn!("fold {fold}: no events in the held-out split, skipped");
            reports.push(FoldReport {
                fold,
                n_train,
                n_test,
                metrics: MetricSet::default(),
                skipped: true,
                notes: vec!["no events in held-out split".into()],
            });
            continue;
        }
        let run = run_fold(data, folds, fold, train, eval)?;
        let mut notes = run.evaluation.notes.clone();
        if let Some(m) = run.evaluation.fndcg_subsample {
            notes.push(format!("FNDCG@k computed on a subsample of {m} records"));
        }
        if run.trace.skipped_batches > 0 {
            notes.push(format!("{} training batches without events skipped", run.trace.skipped_batches));
        }
        reports.push(FoldReport {
            fold,
            n_train: run.n_train,
            n_test: run.n_test,
            metrics: run.evaluation.metrics,
            skipped: false,
            notes,
        });
    }
    Ok(EvalReport::new(
        train.variant.as_str(),
        train.gamma,
        eval.k,
        train.seed,
        folds.n_folds(),
        reports,
    ))
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    /// score this saved model on the whole dataset instead of cross-validating
    pub model: Option<PathBuf>,
    /// also cross-validate this variant on the same folds
    pub compare: Option<Variant>,
}

/// Writes `reports/<stem>.json` and `.csv`, plus a paired comparison when
/// requested.
pub fn cmd_evaluate(cfg: &ExperimentConfig, opts: &EvaluateOptions) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load(cfg)?;
    let layout = Layout::new(&cfg.output);
    let eval = cfg.eval_options();

    if let Some(model_path) = &opts.model {
        let file = crate::formats::load_model(model_path)?;
        let model = file.into_model();
        let scaled = match &model.scaler {
            Some(s) => s.apply(&data)?,
            None => data.clone(),
        };
        let ev = evaluate(&model, &scaled, &eval)?;
        let report = EvalReport::new(
            "fixed",
            f64::NAN,
            ev.k,
            cfg.train.seed,
            1,
            vec![FoldReport {
                fold: 0,
                n_train: 0,
                n_test: data.n(),
                metrics: ev.metrics,
                skipped: false,
                notes: ev.notes,
            }],
        );
        let name = model_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        let (j, c) = (layout.report(&format!("{name}.json")), layout.report(&format!("{name}.csv")));
        write_report(&j, &c, &report)?;
        return Ok(vec![j, c]);
    }

    let folds = folds(cfg, &data)?;
    let report = cross_validate(&data, &folds, &cfg.train, &eval)?;
    let name = stem(&cfg.train);
    let (j, c) = (layout.report(&format!("{name}.json")), layout.report(&format!("{name}.csv")));
    write_report(&j, &c, &report)?;
    let mut written = vec![j, c];
    if let Some(other) = opts.compare {
        let train = TrainConfig {
            variant: other,
            ..cfg.train.clone()
        };
        let second = cross_validate(&data, &folds, &train, &eval)?;
        let path = layout.report(&format!("compare-{}-vs-{}.csv", cfg.train.variant, other));
        write_string(&path, &comparison_csv(&report, &second))?;
        written.push(path);
    }
    Ok(written)
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
struct SweepSummaryRow {
    gamma: f64,
    k: usize,
    folds_ok: usize,
    mean: MetricSet,
    std: MetricSet,
}

/// Runs every `(gamma, k, fold)` cell on a worker pool and writes the
/// long-format table `sweeps/sweep-<variant>.csv`, a per-cell summary and,
/// if any cell failed, `sweeps/sweep-<variant>-errors.csv`.
///
/// Output is identical for any worker count: cells are independent and
/// results are collected in grid order.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load(cfg)?;
    let folds = folds(cfg, &data)?;
    let cells = grid_cells(&cfg.sweep.gamma_grid, &cfg.sweep.k_grid).map_err(|e| CliError::Usage(e.to_string()))?;
    let jobs: Vec<(f64, usize, usize)> = cells
        .iter()
        .flat_map(|&(g, k)| (0..folds.n_folds()).map(move |f| (g, k, f)))
        .collect();
    let base_eval = cfg.eval_options();
    let results: Vec<std::result::Result<MetricSet, fairsurv_core::Error>> = pool()?.install(|| {
        jobs.par_iter()
            .map(|&(gamma, k, fold)| {
                let train = cell_config(&cfg.train, gamma, k);
                let eval = EvalOptions { k, ..base_eval.clone() };
                run_fold(&data, &folds, fold, &train, &eval).map(|r| r.evaluation.metrics)
            })
            .collect()
    });

    let variant = cfg.train.variant.as_str();
    let mut table = String::from(SWEEP_HEADER);
    let mut errors = String::new();
    let mut summary = Vec::new();
    for (c, &(gamma, k)) in cells.iter().enumerate() {
        let outcomes: Vec<_> = results[c * folds.n_folds()..(c + 1) * folds.n_folds()].to_vec();
        for (fold, r) in outcomes.iter().enumerate() {
            match r {
                Ok(m) => table += &sweep_rows(variant, gamma, k, fold, m),
                Err(e) => {
                    log::warn!("gamma={gamma} k={k} fold={fold}: {e}");
                    errors += &format!("{variant},{gamma},{k},{fold},\"{}\"\n", e.to_string().replace('"', "'"));
                }
            }
        }
        let row = grid_row(gamma, k, outcomes);
        summary.push(SweepSummaryRow {
            gamma,
            k,
            folds_ok: row.folds.iter().filter(|r| r.is_ok()).count(),
            mean: row.mean,
            std: row.std,
        });
    }

    let layout = Layout::new(&cfg.output);
    let main = layout.sweep(&format!("sweep-{variant}.csv"));
    write_string(&main, &table)?;
    let sum_path = layout.sweep(&format!("sweep-{variant}-summary.json"));
    write_string(
        &sum_path,
        &(serde_json::to_string_pretty(&summary).map_err(|e| CliError::format(&sum_path, e))? + "\n"),
    )?;
    let mut written = vec![main, sum_path];
    if !errors.is_empty() {
        let p = layout.sweep(&format!("sweep-{variant}-errors.csv"));
        write_string(&p, &(String::from("variant,gamma,k,fold,error\n") + &errors))?;
        written.push(p);
        if summary.iter().all(|r| r.folds_ok == 0) {
            return Err(CliError::Compute(fairsurv_core::Error::Undefined("every sweep cell failed".into())));
        }
    }
    Ok(written)
}

/// Per-fold metrics of the fair and Lipschitz variants on identical folds
/// and seeds, and optionally the plain model.
#[derive(Debug, Clone)]
pub struct Ablation {
    pub fair: EvalReport,
    pub lipschitz: EvalReport,
    pub plain: Option<EvalReport>,
}

pub fn run_ablation(data: &SurvivalDataset, folds: &FoldAssignment, train: &TrainConfig, eval: &EvalOptions, include_plain: bool) -> Result<Ablation> {
    let with = |variant| TrainConfig { variant, ..train.clone() };
    Ok(Ablation {
        fair: cross_validate(data, folds, &with(Variant::Fair), eval)?,
        lipschitz: cross_validate(data, folds, &with(Variant::Lipschitz), eval)?,
        plain: if include_plain {
            Some(cross_validate(data, folds, &with(Variant::Plain), eval)?)
        } else {
            None
        },
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Fold rows then a mean row; FNDCG pair first, then the C-index pair.
pub fn ablation_csv(a: &Ablation) -> String {
    let k = a.fair.k;
    let mut out = format!("fold,fndcg@{k}_fair,fndcg@{k}_lipschitz,c_index_fair,c_index_lipschitz\n");
    for (f, l) in a.fair.folds.iter().zip(&a.lipschitz.folds) {
        out += &format!(
            "{},{},{},{},{}\n",
            f.fold,
            cell(f.metrics.fndcg),
            cell(l.metrics.fndcg),
            cell(f.metrics.c_index),
            cell(l.metrics.c_index)
        );
    }
    out += &format!(
        "mean,{},{},{},{}\n",
        cell(a.fair.mean.fndcg),
        cell(a.lipschitz.mean.fndcg),
        cell(a.fair.mean.c_index),
        cell(a.lipschitz.mean.c_index)
    );
    out
}

pub fn ablation_summary_csv(a: &Ablation) -> String {
    let k = a.fair.k;
    let mut out = format!("variant,FNDCG@{k}%,FNDCG@{k}%_std,C-index%,C-index%_std\n");
    let rows = [Some(&a.fair), Some(&a.lipschitz), a.plain.as_ref()];
    for r in rows.into_iter().flatten() {
        out += &format!(
            "{},{},{},{},{}\n",
            r.variant,
            cell(r.mean.fndcg),
            cell(r.std.fndcg),
            cell(r.mean.c_index),
            cell(r.std.c_index)
        );
    }
    out
}

/// Writes `reports/ablation.csv` and `reports/ablation_summary.csv`.
pub fn cmd_ablation(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load(cfg)?;
    let folds = folds(cfg, &data)?;
    let a = run_ablation(&data, &folds, &cfg.train, &cfg.eval_options(), cfg.ablation.include_plain)?;
    let layout = Layout::new(&cfg.output);
    let table = layout.report("ablation.csv");
    let summary = layout.report("ablation_summary.csv");
    write_string(&table, &ablation_csv(&a))?;
    write_string(&summary, &ablation_summary_csv(&a))?;
    Ok(vec![table, summary])
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    generator: &'a str,
    n: usize,
    #[serde(flatten)]
    truth: &'a fairsurv_core::synth::SyntheticTruth,
    #[serde(skip_serializing_if = "Option::is_none")]
    misalignment: Option<&'a fairsurv_core::synth::MisalignmentSpec>,
}

/// Writes `data/<name>.csv` (features, time, event) and the ground truth in
/// `data/<name>.truth.json`.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let s = &cfg.synth;
    let seed = cfg.train.seed;
    let generated = if s.misaligned {
        generate_planted_misalignment(&s.misalignment, seed)
    } else {
        generate_synthetic(s.n, s.beta.len(), &s.beta, s.censor_rate, seed)
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let layout = Layout::new(&cfg.output);
    let csv = layout.data(&format!("{}.csv", s.name));
    let side = layout.data(&format!("{}.truth.json", s.name));
    save_csv(&csv, &generated.data)?;
    let sidecar = Sidecar {
        generator: if s.misaligned { "planted-misalignment" } else { "proportional-hazards" },
        n: generated.data.n(),
        truth: &generated.truth,
        misalignment: s.misaligned.then_some(&s.misalignment),
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::format(&side, e))?;
    write_string(&side, &(json + "\n"))?;
    Ok(vec![csv, side])
}

pub fn ensure_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}
