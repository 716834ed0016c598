//! Censoring-aware predictive metrics and evaluation reports.
//!
//! Brier score and time-dependent AUC use inverse probability of censoring
//! weights, with the censoring survival `G` estimated by Kaplan-Meier on the
//! evaluation data.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use serde::{Deserialize, Serialize};

use crate::cox::{censoring_survival, kaplan_meier, CoxModel, RiskScores};
use crate::data::{subsample_indices, SurvivalDataset};
use crate::error::{Error, Result};
use crate::fairness::model_fndcg;
use crate::step::StepFunction;

/// Harrell's C-index over comparable pairs (i with an event, `T_j > T_i`).
/// A pair counts when `risk_j < risk_i`; tied risks count 0, or 1/2 with
/// `tie_credit`.
pub fn c_index(scores: &RiskScores, data: &SurvivalDataset, tie_credit: bool) -> Result<f64> {
    let n = data.n();
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.time(a).total_cmp(&data.time(b)).then(a.cmp(&b)));

    let mut concordant = 0.0;
    let mut comparable = 0u64;
    for (pos, &i) in order.iter().enumerate() {
        if !data.event(i) {
            continue;
        }
        let ti = data.time(i);
        let ri = scores.get(i);
        for &j in &order[pos + 1..] {
            if data.time(j) <= ti {
                continue;
            }
            comparable += 1;
            let rj = scores.get(j);
            if rj < ri {
                concordant += 1.0;
            } else if tie_credit && rj == ri {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(concordant / comparable as f64)
}

/// Censoring weights for one evaluation set.
#[derive(Debug, Clone)]
pub struct CensoringWeights {
    survival: StepFunction,
}

impl CensoringWeights {
    pub fn fit(data: &SurvivalDataset) -> Result<Self> {
        Ok(Self {
            survival: censoring_survival(&data.times(), &data.events())?,
        })
    }

    /// Censoring survival of 1 everywhere (no censoring).
    pub fn none() -> Self {
        Self {
            survival: StepFunction::new(1.0, Vec::new()),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.survival.eval(t)
    }

    pub fn before(&self, t: f64) -> f64 {
        self.survival.eval_left(t)
    }
}

/// IPCW Brier score at `t` with explicit censoring weights. Records whose
/// weight would divide by zero are left out of both sum and count.
pub fn brier_score_with(
    model: &CoxModel,
    data: &SurvivalDataset,
    t: f64,
    weights: &CensoringWeights,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let g_t = weights.at(t);
    let mut total = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for r in data.records() {
        let s = model.survival(&r.features, t)?;
        if r.time <= t {
            if r.event {
                let g = weights.before(r.time);
                if g > 0.0 {
                    total += s * s / g;
                } else {
                    excluded += 1;
                    continue;
                }
            }
            // censored before t: contributes zero but still counts
        } else if g_t > 0.0 {
            total += (1.0 - s) * (1.0 - s) / g_t;
        } else {
            excluded += 1;
            continue;
        }
        used += 1;
    }
    if excluded > 0 {
        log::warn!("Brier score at t={t}: {excluded} record(s) excluded, censoring survival is 0");
    }
    if used == 0 {
        return Err(Error::Undefined(format!("Brier score at t={t}")));
    }
    Ok(total / used as f64)
}

pub fn brier_score(model: &CoxModel, data: &SurvivalDataset, t: f64) -> Result<f64> {
    brier_score_with(model, data, t, &CensoringWeights::fit(data)?)
}

/// `points` equally spaced times from the first to the last observed event.
pub fn default_time_grid(data: &SurvivalDataset, points: usize) -> Result<Vec<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in data.records().iter().filter(|r| r.event) {
        lo = lo.min(r.time);
        hi = hi.max(r.time);
    }
    if !lo.is_finite() {
        return Err(Error::NoEvents);
    }
    if points <= 1 || hi == lo {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect())
}

/// Trapezoidal time-average of the Brier score over an increasing grid.
pub fn integrated_brier(model: &CoxModel, data: &SurvivalDataset, grid: &[f64]) -> Result<f64> {
    let weights = CensoringWeights::fit(data)?;
    let scores: Vec<f64> = grid
        .iter()
        .map(|&t| brier_score_with(model, data, t, &weights))
        .collect::<Result<_>>()?;
    trapezoid_mean(grid, &scores)
}

pub(crate) fn trapezoid_mean(grid: &[f64], values: &[f64]) -> Result<f64> {
    match grid.len() {
        0 => Err(Error::invalid("empty time grid")),
        1 => Ok(values[0]),
        _ => {
            if grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid("time grid must be strictly increasing"));
            }
            let area: f64 = grid
                .windows(2)
                .zip(values.windows(2))
                .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
                .sum();
            Ok(area / (grid[grid.len() - 1] - grid[0]))
        }
    }
}

/// Cumulative/dynamic AUC at `t`: cases have an event by `t` (weighted by
/// `1/G(T_i-)`), controls are still at risk after `t`. A pair is correct when
/// the case has the higher risk.
pub fn cumulative_dynamic_auc(
    scores: &RiskScores,
    data: &SurvivalDataset,
    t: f64,
    weights: &CensoringWeights,
    tie_credit: bool,
) -> Result<f64> {
    let n = data.n();
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.len(),
        });
    }
    let controls: Vec<f64> = (0..n)
        .filter(|&j| data.time(j) > t)
        .map(|j| scores.get(j))
        .collect();
    let mut num = 0.0;
    let mut case_weight = 0.0;
    for i in 0..n {
        if !(data.event(i) && data.time(i) <= t) {
            continue;
        }
        let g = weights.before(data.time(i));
        if !(g > 0.0) {
            continue;
        }
        let w = 1.0 / g;
        let ri = scores.get(i);
        let mut hits = 0.0;
        for &rj in &controls {
            if ri > rj {
                hits += 1.0;
            } else if tie_credit && ri == rj {
                hits += 0.5;
            }
        }
        num += w * hits;
        case_weight += w;
    }
    if case_weight == 0.0 || controls.is_empty() {
        return Err(Error::Undefined(format!("time-dependent AUC at t={t}")));
    }
    Ok(num / (case_weight * controls.len() as f64))
}

pub fn time_dependent_auc(model: &CoxModel, data: &SurvivalDataset, t: f64, tie_credit: bool) -> Result<f64> {
    let scores = crate::cox::risk_scores(model, data)?;
    cumulative_dynamic_auc(&scores, data, t, &CensoringWeights::fit(data)?, tie_credit)
}

/// Average of the AUC over distinct event times, weighted by the Kaplan-Meier
/// event-probability mass at each time. Times where the AUC is undefined are
/// skipped and the weights renormalized.
pub fn integrated_auc(scores: &RiskScores, data: &SurvivalDataset, tie_credit: bool) -> Result<f64> {
    let weights = CensoringWeights::fit(data)?;
    let km = kaplan_meier(&data.times(), &data.events())?;
    let mut prev = km.initial;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, s) in &km.points {
        let mass = prev - s;
        prev = s;
        if let Ok(auc) = cumulative_dynamic_auc(scores, data, t, &weights, tie_credit) {
            num += mass * auc;
            den += mass;
        }
    }
    if !(den > 0.0) {
        return Err(Error::Undefined("integrated time-dependent AUC".into()));
    }
    Ok(num / den)
}

/// The four reported metrics, in percent. `None` marks a metric that could
/// not be computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub fndcg: Option<f64>,
    pub c_index: Option<f64>,
    pub brier: Option<f64>,
    pub td_auc: Option<f64>,
}

impl MetricSet {
    pub const NAMES: [&'static str; 4] = ["fndcg", "c_index", "brier", "td_auc"];

    pub fn values(&self) -> [Option<f64>; 4] {
        [self.fndcg, self.c_index, self.brier, self.td_auc]
    }

    pub fn from_values(v: [Option<f64>; 4]) -> Self {
        Self {
            fndcg: v[0],
            c_index: v[1],
            brier: v[2],
            td_auc: v[3],
        }
    }

    /// All present values lie in [0, 100].
    pub fn in_range(&self) -> bool {
        self.values()
            .iter()
            .flatten()
            .all(|v| (0.0..=100.0).contains(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub k: usize,
    pub tie_credit: bool,
    /// FNDCG@k is computed on a seeded subsample when the evaluation set is
    /// larger than this.
    pub subsample_cap: usize,
    pub seed: u64,
    pub brier_grid_points: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k: 10,
            tie_credit: false,
            subsample_cap: 20_000,
            seed: 0,
            brier_grid_points: 100,
        }
    }
}

/// Metrics of one model on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: MetricSet,
    /// effective k after clamping to the evaluation set
    pub k: usize,
    pub fndcg_subsample: Option<usize>,
    pub notes: Vec<String>,
}

/// Computes FNDCG@k, C-index, integrated Brier score and integrated
/// time-dependent AUC (percent). `data` must already be scaled with the
/// model's training scaler. Failed metrics are `None` with a note.
pub fn evaluate(model: &CoxModel, data: &SurvivalDataset, opts: &EvalOptions) -> Result<Evaluation> {
    let scores = crate::cox::risk_scores(model, data)?;
    let mut notes = Vec::new();
    let pct = |r: Result<f64>, name: &str, notes: &mut Vec<String>| match r {
        Ok(v) => Some(100.0 * v),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };

    let idx = subsample_indices(data.n(), opts.subsample_cap, opts.seed);
    let fndcg_subsample = (idx.len() < data.n()).then_some(idx.len());
    let fair_set = if fndcg_subsample.is_some() {
        notes.push(format!(
            "fndcg: computed on a seeded subsample of {} of {} records",
            idx.len(),
            data.n()
        ));
        data.subset(&idx)?
    } else {
        data.clone()
    };
    let k = opts.k.min(fair_set.n() - 1);
    if k != opts.k {
        notes.push(format!("fndcg: k clamped from {} to {k}", opts.k));
    }
    let fair_scores = crate::cox::risk_scores(model, &fair_set)?;
    let fndcg = pct(
        model_fndcg(&fair_set, &fair_scores, k).map(|f| f.value),
        "fndcg",
        &mut notes,
    );
    let c = pct(c_index(&scores, data, opts.tie_credit), "c_index", &mut notes);
    let brier = pct(
        default_time_grid(data, opts.brier_grid_points).and_then(|g| integrated_brier(model, data, &g)),
        "brier",
        &mut notes,
    );
    let auc = pct(integrated_auc(&scores, data, opts.tie_credit), "td_auc", &mut notes);

    let metrics = MetricSet {
        fndcg,
        c_index: c,
        brier,
        td_auc: auc,
    };
    debug_assert!(metrics.in_range(), "{metrics:?}");
    Ok(Evaluation {
        metrics,
        k,
        fndcg_subsample,
        notes,
    })
}

/// One cross-validation fold of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: MetricSet,
    pub skipped: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub gamma: f64,
    pub k: usize,
    pub seed: u64,
    pub n_folds: usize,
    pub folds: Vec<FoldReport>,
    pub mean: MetricSet,
    pub std: MetricSet,
    pub aggregation: String,
}

impl EvalReport {
    pub fn new(variant: &str, gamma: f64, k: usize, seed: u64, n_folds: usize, folds: Vec<FoldReport>) -> Self {
        let sets: Vec<MetricSet> = folds
            .iter()
            .filter(|f| !f.skipped)
            .map(|f| f.metrics)
            .collect();
        let (mean, std) = aggregate(&sets);
        Self {
            variant: variant.into(),
            gamma,
            k,
            seed,
            n_folds,
            folds,
            mean,
            std,
            aggregation: "brier: trapezoidal mean over 100 times between first and last event; \
                          td_auc: Kaplan-Meier mass weighted mean over event times"
                .into(),
        }
    }
}

/// Mean and sample standard deviation of every metric over the sets where
/// it is present.
pub fn aggregate(sets: &[MetricSet]) -> (MetricSet, MetricSet) {
    let mut mean = [None; 4];
    let mut std = [None; 4];
    for m in 0..4 {
        let vals: Vec<f64> = sets.iter().filter_map(|s| s.values()[m]).collect();
        if vals.is_empty() {
            continue;
        }
        let n = vals.len() as f64;
        let mu = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean[m] = Some(mu);
        std[m] = Some(libm::sqrt(var));
    }
    (MetricSet::from_values(mean), MetricSet::from_values(std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;
    use approx::assert_relative_eq;

    fn uncensored(n: usize) -> SurvivalDataset {
        SurvivalDataset::from_records(
            (0..n)
                .map(|i| SurvivalRecord::new(vec![i as f64], 1.0 + i as f64, true))
                .collect(),
        )
        .unwrap()
    }

    fn constant_survival_model(p: usize, s: f64) -> CoxModel {
        // beta = 0 and H0 = -ln s from the first instant on
        CoxModel {
            beta: vec![0.0; p],
            baseline: StepFunction::new(0.0, vec![(1e-9, -libm::log(s))]),
            scaler: None,
        }
    }

    #[test]
    fn c_index_extremes() {
        let d = uncensored(6);
        let perfect = RiskScores::new((0..6).map(|i| 6.0 - i as f64).collect());
        assert_eq!(c_index(&perfect, &d, false).unwrap(), 1.0);
        let flat = RiskScores::new(vec![1.0; 6]);
        assert_eq!(c_index(&flat, &d, false).unwrap(), 0.0);
        assert_eq!(c_index(&flat, &d, true).unwrap(), 0.5);
    }

    #[test]
    fn c_index_needs_comparable_pairs() {
        let d = SurvivalDataset::from_records(vec![
            SurvivalRecord::new(vec![0.0], 2.0, true),
            SurvivalRecord::new(vec![0.0], 1.0, false),
        ])
        .unwrap();
        assert_eq!(
            c_index(&RiskScores::new(vec![1.0, 2.0]), &d, false),
            Err(Error::NoComparablePairs)
        );
    }

    #[test]
    fn brier_of_constant_half_is_quarter() {
        let d = uncensored(5);
        let model = constant_survival_model(1, 0.5);
        for t in [1.0, 2.5, 4.0] {
            assert_relative_eq!(brier_score(&model, &d, t).unwrap(), 0.25, epsilon = 1e-12);
        }
        assert!(brier_score(&model, &d, 0.0).is_err());
    }

    #[test]
    fn integrated_brier_constant_and_single_point() {
        let d = uncensored(5);
        let model = constant_survival_model(1, 0.5);
        let grid = default_time_grid(&d, 100).unwrap();
        assert_eq!(grid.len(), 100);
        assert_eq!(grid[0], 1.0);
        assert_eq!(grid[99], 5.0);
        assert_relative_eq!(integrated_brier(&model, &d, &grid).unwrap(), 0.25, epsilon = 1e-12);
        let single = integrated_brier(&model, &d, &[2.0]).unwrap();
        assert_eq!(single, brier_score(&model, &d, 2.0).unwrap());
        assert!(integrated_brier(&model, &d, &[]).is_err());
        assert!(integrated_brier(&model, &d, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn auc_perfect_and_flat() {
        let d = uncensored(8);
        let perfect = RiskScores::new((0..8).map(|i| 8.0 - i as f64).collect());
        let w = CensoringWeights::fit(&d).unwrap();
        for t in 1..8 {
            let a = cumulative_dynamic_auc(&perfect, &d, t as f64, &w, false).unwrap();
            assert_eq!(a, 1.0);
        }
        assert!(cumulative_dynamic_auc(&perfect, &d, 8.0, &w, false).is_err());
        assert!(cumulative_dynamic_auc(&perfect, &d, 0.5, &w, false).is_err());
        let flat = RiskScores::new(vec![2.0; 8]);
        assert_eq!(cumulative_dynamic_auc(&flat, &d, 3.0, &w, false).unwrap(), 0.0);
        assert_eq!(cumulative_dynamic_auc(&flat, &d, 3.0, &w, true).unwrap(), 0.5);
        assert_eq!(integrated_auc(&perfect, &d, false).unwrap(), 1.0);
    }

    #[test]
    fn aggregate_mean_std() {
        let sets = [
            MetricSet::from_values([Some(10.0), Some(50.0), None, Some(1.0)]),
            MetricSet::from_values([Some(20.0), Some(70.0), None, None]),
        ];
        let (mean, std) = aggregate(&sets);
        assert_eq!(mean.fndcg, Some(15.0));
        assert_eq!(mean.c_index, Some(60.0));
        assert_eq!(mean.brier, None);
        assert_eq!(mean.td_auc, Some(1.0));
        assert_relative_eq!(std.fndcg.unwrap(), libm::sqrt(50.0));
        assert_eq!(std.td_auc, Some(0.0));
    }
}
