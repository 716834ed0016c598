//! Fairness-regularized Cox fitting.
//!
//! The objective for a mini-batch is
//! `utility - gamma * fairness`, where `utility` is the batch negative log
//! partial likelihood (risk sets restricted to the batch) and `fairness` is
//! the FNDCG@k surrogate (`Variant::Fair`), minus the Lipschitz hinge
//! penalty (`Variant::Lipschitz`), or zero (`Variant::Plain`).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cox::{nll_with_gradient, CoxModel, RiskScores};
use crate::data::{subsample_indices, FeatureScaler, FoldAssignment, SurvivalDataset};
use crate::error::{Error, Result};
use crate::eval::{aggregate, c_index, evaluate, EvalOptions, Evaluation, MetricSet};
use crate::fairness::{lipschitz_penalty_with_grad, model_fndcg, SimilarityMatrix};
use crate::optim::Adam;
use crate::surrogate::SurrogateBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// FNDCG@k surrogate regularizer
    Fair,
    /// Lipschitz hinge-penalty regularizer
    Lipschitz,
    /// unregularized Cox model
    Plain,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Fair => "fair",
            Variant::Lipschitz => "lipschitz",
            Variant::Plain => "plain",
        }
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fair" => Ok(Variant::Fair),
            "lipschitz" => Ok(Variant::Lipschitz),
            "plain" => Ok(Variant::Plain),
            other => Err(Error::invalid(alloc::format!(
                "unknown variant '{other}' (expected fair, lipschitz or plain)"
            ))),
        }
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub k: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    pub seed: u64,
    pub variant: Variant,
    pub lipschitz_l: f64,
    pub ridge: f64,
    /// cap on the training records used for the per-epoch exact FNDCG@k
    pub trace_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            k: 10,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 128,
            temperature: 0.03,
            seed: 0,
            variant: Variant::Fair,
            lipschitz_l: 1.0,
            ridge: 0.0,
            trace_cap: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be a finite non-negative number"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if self.variant == Variant::Lipschitz && !(self.lipschitz_l > 0.0) {
            return Err(Error::invalid("lipschitz_l must be positive"));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::invalid("ridge must be non-negative"));
        }
        Ok(())
    }

    fn regularized(&self) -> bool {
        self.variant != Variant::Plain && self.gamma != 0.0
    }
}

/// Loss terms and gradient for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchObjective {
    pub loss: f64,
    pub utility: f64,
    /// the term multiplied by `-gamma`; `None` when not computed
    pub fairness: Option<f64>,
    pub grad: Vec<f64>,
}

fn objective(
    beta: &[f64],
    batch: &SurvivalDataset,
    surrogate: Option<&SurrogateBatch>,
    config: &TrainConfig,
) -> Result<BatchObjective> {
    let (utility, mut grad) = nll_with_gradient(beta, batch, config.ridge)?;
    let mut loss = utility;
    let mut fairness = None;
    if config.regularized() {
        let gamma = config.gamma;
        match config.variant {
            Variant::Fair => {
                let owned;
                let sb = match surrogate {
                    Some(sb) => sb,
                    None => {
                        owned = SurrogateBatch::new(batch, config.k)?;
                        &owned
                    }
                };
                let (s, gs) = sb.value_and_grad(beta, config.temperature)?;
                loss -= gamma * s;
                for (g, d) in grad.iter_mut().zip(&gs) {
                    *g -= gamma * d;
                }
                fairness = Some(s);
            }
            Variant::Lipschitz => {
                let scores = RiskScores::from_beta(beta, batch)?;
                let (pen, d_risk) = lipschitz_penalty_with_grad(batch, &scores, config.lipschitz_l)?;
                loss += gamma * pen;
                for ((r, d), rec) in scores.values.iter().zip(&d_risk).zip(batch.records()) {
                    let w = gamma * d * r;
                    for (g, x) in grad.iter_mut().zip(&rec.features) {
                        *g += w * x;
                    }
                }
                fairness = Some(-pen);
            }
            Variant::Plain => unreachable!(),
        }
    }
    Ok(BatchObjective {
        loss,
        utility,
        fairness,
        grad,
    })
}

/// Unified objective and gradient on a batch with the given input
/// similarities (restricted to the batch).
pub fn unified_objective(
    beta: &[f64],
    batch: &SurvivalDataset,
    sim_in: &SimilarityMatrix,
    config: &TrainConfig,
) -> Result<BatchObjective> {
    config.validate()?;
    let sb = if config.variant == Variant::Fair && config.gamma != 0.0 {
        Some(SurrogateBatch::with_similarity(batch, sim_in.clone(), config.k)?)
    } else {
        None
    };
    objective(beta, batch, sb.as_ref(), config)
}

pub fn unified_loss(
    beta: &[f64],
    batch: &SurvivalDataset,
    sim_in: &SimilarityMatrix,
    config: &TrainConfig,
) -> Result<f64> {
    unified_objective(beta, batch, sim_in, config).map(|o| o.loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// mean batch negative log partial likelihood
    pub utility: f64,
    /// mean batch surrogate FNDCG@k (fair variant with nonzero gamma only)
    pub surrogate: Option<f64>,
    /// exact FNDCG@k on the (possibly capped) training set
    pub fndcg: Option<f64>,
    /// mean batch gradient norm
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub skipped_batches: usize,
    pub final_fndcg: Option<f64>,
    pub final_c_index: Option<f64>,
}

/// Mini-batch Adam on the unified objective. `data` should already be
/// scaled. Deterministic given `config.seed`.
pub fn fit(data: &SurvivalDataset, config: &TrainConfig) -> Result<(CoxModel, TrainTrace)> {
    config.validate()?;
    if data.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let p = data.p();
    let mut beta = vec![0.0; p];
    let mut adam = Adam::new(p, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.n()).collect();

    let monitor_idx = subsample_indices(data.n(), config.trace_cap.max(2), config.seed);
    let monitor = data.subset(&monitor_idx)?;
    let monitor_k = config.k.min(monitor.n() - 1);

    let mut epochs = Vec::with_capacity(config.epochs);
    let mut skipped_batches = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut utility_sum = 0.0;
        let mut surrogate_sum = 0.0;
        let mut norm_sum = 0.0;
        let mut used = 0usize;

        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch = data.subset(chunk)?;
            if batch.n_events() == 0 {
                log::debug!("epoch {epoch} batch {b}: no events, skipped");
                skipped_batches += 1;
                continue;
            }
            // cubic in the batch size, so only built when it enters the loss
            let sb = if config.variant == Variant::Fair && config.regularized() {
                Some(SurrogateBatch::new(&batch, config.k)?)
            } else {
                None
            };
            let obj = objective(&beta, &batch, sb.as_ref(), config)?;
            if !obj.loss.is_finite() || obj.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    beta,
                });
            }
            let monitored = match (&sb, obj.fairness) {
                (_, Some(s)) if config.variant == Variant::Fair => s,
                (Some(sb), _) => sb.value(&beta, config.temperature)?,
                _ => 0.0,
            };
            utility_sum += obj.utility;
            surrogate_sum += monitored;
            norm_sum += libm::sqrt(obj.grad.iter().map(|g| g * g).sum());
            used += 1;
            adam.step(&mut beta, &obj.grad);
        }

        let denom = used.max(1) as f64;
        let scores = RiskScores::from_beta(&beta, &monitor)?;
        let fndcg = model_fndcg(&monitor, &scores, monitor_k).ok().map(|f| f.value);
        epochs.push(EpochRecord {
            epoch,
            utility: utility_sum / denom,
            surrogate: (config.variant == Variant::Fair && config.regularized()).then_some(surrogate_sum / denom),
            fndcg,
            grad_norm: norm_sum / denom,
        });
    }

    let model = CoxModel::with_baseline(beta, data, None)?;
    let scores = RiskScores::from_beta(&model.beta, &monitor)?;
    let final_fndcg = model_fndcg(&monitor, &scores, monitor_k).ok().map(|f| f.value);
    let full_scores = RiskScores::from_beta(&model.beta, data)?;
    let final_c_index = c_index(&full_scores, data, false).ok();
    Ok((
        model,
        TrainTrace {
            epochs,
            skipped_batches,
            final_fndcg,
            final_c_index,
        },
    ))
}

/// Outcome of training and evaluating one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRun {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub model: CoxModel,
    pub trace: TrainTrace,
    pub evaluation: Evaluation,
}

/// Fits a scaler and model on every fold but `fold` and evaluates on `fold`.
pub fn run_fold(
    data: &SurvivalDataset,
    folds: &FoldAssignment,
    fold: usize,
    config: &TrainConfig,
    eval: &EvalOptions,
) -> Result<FoldRun> {
    let train = data.subset(&folds.train_indices(fold))?;
    let test = data.subset(&folds.test_indices(fold))?;
    if train.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let scaler = FeatureScaler::fit(&train)?;
    let train_s = scaler.apply(&train)?;
    let test_s = scaler.apply(&test)?;
    let (mut model, trace) = fit(&train_s, config)?;
    let evaluation = evaluate(&model, &test_s, eval)?;
    model.scaler = Some(scaler);
    Ok(FoldRun {
        fold,
        n_train: train.n(),
        n_test: test.n(),
        model,
        trace,
        evaluation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub gamma: f64,
    pub k: usize,
    pub folds: Vec<core::result::Result<MetricSet, Error>>,
    pub mean: MetricSet,
    pub std: MetricSet,
}

/// `(gamma, k)` cells sorted lexicographically, duplicates removed.
pub fn grid_cells(gamma_grid: &[f64], k_grid: &[usize]) -> Result<Vec<(f64, usize)>> {
    if gamma_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::invalid("gamma and k grids must be non-empty"));
    }
    let mut cells: Vec<(f64, usize)> = gamma_grid
        .iter()
        .flat_map(|&g| k_grid.iter().map(move |&k| (g, k)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cells.dedup();
    Ok(cells)
}

/// Config for one grid cell.
pub fn cell_config(template: &TrainConfig, gamma: f64, k: usize) -> TrainConfig {
    TrainConfig {
        gamma,
        k,
        ..template.clone()
    }
}

/// Builds a [`GridRow`] from per-fold outcomes.
pub fn grid_row(gamma: f64, k: usize, folds: Vec<core::result::Result<MetricSet, Error>>) -> GridRow {
    let ok: Vec<MetricSet> = folds.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let (mean, std) = aggregate(&ok);
    GridRow {
        gamma,
        k,
        folds,
        mean,
        std,
    }
}

/// Sequential grid search: every `(gamma, k)` cell is trained on each fold's
/// training split and evaluated on its held-out split. Failures are kept per
/// fold, annotated with the cell.
pub fn grid_search(
    data: &SurvivalDataset,
    folds: &FoldAssignment,
    gamma_grid: &[f64],
    k_grid: &[usize],
    template: &TrainConfig,
    eval: &EvalOptions,
) -> Result<Vec<GridRow>> {
    let cells = grid_cells(gamma_grid, k_grid)?;
    Ok(cells
        .into_iter()
        .map(|(gamma, k)| {
            let config = cell_config(template, gamma, k);
            let eval = EvalOptions { k, ..eval.clone() };
            let outcomes = (0..folds.n_folds())
                .map(|fold| {
                    run_fold(data, folds, fold, &config, &eval)
                        .map(|r| r.evaluation.metrics)
                        .map_err(|e| Error::Cell {
                            gamma,
                            k,
                            fold,
                            source: alloc::boxed::Box::new(e),
                        })
                })
                .collect();
            grid_row(gamma, k, outcomes)
        })
        .collect())
}
