//! Fairness-aware Cox proportional hazards for censored data.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerics:
//!
//! - [`data`]: censored datasets, z-score scaling, stratified k-fold splits
//! - [`synth`]: seeded synthetic proportional-hazards data
//! - [`cox`]: partial likelihood, gradient, Breslow baseline, Kaplan-Meier
//! - [`fairness`]: similarity matrices, per-individual concordance, DCG and FNDCG@k
//! - [`surrogate`]: smooth relaxation of FNDCG@k used as a training regularizer
//! - [`train`]: unified objective, Adam mini-batch fitting, grid search
//! - [`eval`]: C-index, IPCW Brier score, cumulative/dynamic AUC, reports
//!
//! File formats, CSV ingestion and the experiment CLI live in the `fairsurv`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cox;
pub mod data;
pub mod error;
pub mod eval;
pub mod fairness;
pub mod optim;
pub mod step;
pub mod surrogate;
pub mod synth;
pub mod train;

pub use cox::{CoxModel, RiskScores};
pub use data::{FeatureScaler, FoldAssignment, SurvivalDataset, SurvivalRecord};
pub use error::{Error, Result};
pub use eval::{EvalOptions, EvalReport, MetricSet};
pub use fairness::{ConcordanceVector, RankedList, SimilarityKind, SimilarityMatrix};
pub use step::StepFunction;
pub use train::{TrainConfig, TrainTrace, Variant};

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
