//! Cox proportional hazards: risk scores, the negative log partial likelihood
//! and its gradient, the Breslow baseline hazard and Kaplan-Meier curves.
//!
//! Risk sets are `{j : T_j >= T_i}`, so tied event times share a risk set
//! (Breslow's approximation). All sums over risk sets are shifted by the
//! largest linear predictor before exponentiating.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureScaler, SurvivalDataset};
use crate::error::{Error, Result};
use crate::step::StepFunction;

/// `exp(beta' x_i)` for each record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScores {
    pub values: Vec<f64>,
}

impl RiskScores {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn from_beta(beta: &[f64], data: &SurvivalDataset) -> Result<Self> {
        Ok(Self::new(
            linear_predictors(beta, data)?
                .into_iter()
                .map(libm::exp)
                .collect(),
        ))
    }
}

/// Fitted coefficients plus the Breslow cumulative baseline hazard.
///
/// The model works in the scaled feature space; `scaler`, when present, is
/// the transform that was fit on the training data and must be applied to
/// raw covariates before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub beta: Vec<f64>,
    pub baseline: StepFunction,
    pub scaler: Option<FeatureScaler>,
}

impl CoxModel {
    /// Attaches a Breslow baseline estimated on `data` to `beta`.
    pub fn with_baseline(
        beta: Vec<f64>,
        data: &SurvivalDataset,
        scaler: Option<FeatureScaler>,
    ) -> Result<Self> {
        let baseline = breslow_baseline(&beta, data)?;
        Ok(Self {
            beta,
            baseline,
            scaler,
        })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.beta.len(),
                found: x.len(),
            });
        }
        Ok(crate::dot(&self.beta, x))
    }

    pub fn cumulative_baseline(&self, t: f64) -> f64 {
        self.baseline.eval(t)
    }

    /// `S(t|x) = exp(-H0(t) exp(beta' x))`.
    pub fn survival(&self, x: &[f64], t: f64) -> Result<f64> {
        survival_function(self, x, t)
    }
}

pub fn linear_predictors(beta: &[f64], data: &SurvivalDataset) -> Result<Vec<f64>> {
    if beta.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: beta.len(),
        });
    }
    Ok(data
        .records()
        .iter()
        .map(|r| crate::dot(beta, &r.features))
        .collect())
}

pub fn risk_scores(model: &CoxModel, data: &SurvivalDataset) -> Result<RiskScores> {
    RiskScores::from_beta(&model.beta, data)
}

/// Record indices by descending time; equal times keep index order.
fn by_time_desc(data: &SurvivalDataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| data.time(b).total_cmp(&data.time(a)).then(a.cmp(&b)));
    order
}

/// Negative log partial likelihood, its gradient, with an optional ridge term
/// `ridge * |beta|^2`.
pub fn nll_with_gradient(
    beta: &[f64],
    data: &SurvivalDataset,
    ridge: f64,
) -> Result<(f64, Vec<f64>)> {
    let eta = linear_predictors(beta, data)?;
    if data.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let p = data.p();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let order = by_time_desc(data);

    let mut risk_sum = 0.0;
    let mut risk_x = vec![0.0; p];
    let mut nll = 0.0;
    let mut grad = vec![0.0; p];

    let mut start = 0;
    while start < order.len() {
        let t = data.time(order[start]);
        let mut end = start;
        while end < order.len() && data.time(order[end]) == t {
            let i = order[end];
            let w = libm::exp(eta[i] - shift);
            risk_sum += w;
            for (acc, x) in risk_x.iter_mut().zip(data.features(i)) {
                *acc += w * x;
            }
            end += 1;
        }
        let log_risk = libm::log(risk_sum) + shift;
        for &i in &order[start..end] {
            if !data.event(i) {
                continue;
            }
            nll -= eta[i] - log_risk;
            for ((g, x), rx) in grad.iter_mut().zip(data.features(i)).zip(&risk_x) {
                *g -= x - rx / risk_sum;
            }
        }
        start = end;
    }

    if ridge != 0.0 {
        for (g, b) in grad.iter_mut().zip(beta) {
            nll += ridge * b * b;
            *g += 2.0 * ridge * b;
        }
    }
    Ok((nll, grad))
}

/// `-sum_{i: event} (beta'x_i - log sum_{j: T_j >= T_i} exp(beta'x_j))`.
pub fn neg_log_partial_likelihood(beta: &[f64], data: &SurvivalDataset) -> Result<f64> {
    nll_with_gradient(beta, data, 0.0).map(|(v, _)| v)
}

pub fn nll_gradient(beta: &[f64], data: &SurvivalDataset) -> Result<Vec<f64>> {
    nll_with_gradient(beta, data, 0.0).map(|(_, g)| g)
}

/// Breslow estimate of the cumulative baseline hazard
/// `H0(t) = sum_{event times s <= t} d_s / sum_{j: T_j >= s} exp(beta'x_j)`.
pub fn breslow_baseline(beta: &[f64], data: &SurvivalDataset) -> Result<StepFunction> {
    let eta = linear_predictors(beta, data)?;
    if data.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let order = by_time_desc(data);

    let mut jumps = Vec::new();
    let mut risk_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let t = data.time(order[start]);
        let mut end = start;
        let mut deaths = 0usize;
        while end < order.len() && data.time(order[end]) == t {
            let i = order[end];
            risk_sum += libm::exp(eta[i] - shift);
            if data.event(i) {
                deaths += 1;
            }
            end += 1;
        }
        if deaths > 0 {
            // d / (e^shift * risk_sum)
            jumps.push((t, deaths as f64 * libm::exp(-shift) / risk_sum));
        }
        start = end;
    }
    jumps.reverse();

    let mut cumulative = 0.0;
    let points = jumps
        .into_iter()
        .map(|(t, dh)| {
            cumulative += dh;
            (t, cumulative)
        })
        .collect();
    Ok(StepFunction::new(0.0, points))
}

pub fn survival_function(model: &CoxModel, x: &[f64], t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let eta = model.linear_predictor(x)?;
    Ok(libm::exp(-model.cumulative_baseline(t) * libm::exp(eta)))
}

/// Product-limit estimator of the survival function.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepFunction> {
    if times.is_empty() {
        return Err(Error::TooFewRecords {
            required: 1,
            found: 0,
        });
    }
    if times.len() != events.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: events.len(),
        });
    }
    if let Some(row) = times.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidTime {
            row,
            value: times[row],
        });
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));

    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut points = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let t = times[order[start]];
        let mut end = start;
        let mut deaths = 0usize;
        while end < order.len() && times[order[end]] == t {
            if events[order[end]] {
                deaths += 1;
            }
            end += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            points.push((t, surv));
        }
        at_risk -= end - start;
        start = end;
    }
    Ok(StepFunction::new(1.0, points))
}

/// Kaplan-Meier estimate of the censoring survival `G(t) = P(C > t)`.
pub fn censoring_survival(times: &[f64], events: &[bool]) -> Result<StepFunction> {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    kaplan_meier(times, &flipped)
}
