//! Censored datasets, feature scaling and cross-validation folds.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One individual: covariates, observed time and event indicator.
///
/// `event == true` means the event happened at `time`; `false` means the
/// individual was censored at `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub features: Vec<f64>,
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(features: Vec<f64>, time: f64, event: bool) -> Self {
        Self {
            features,
            time,
            event,
        }
    }
}

/// An ordered collection of [`SurvivalRecord`]s sharing one feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
    feature_names: Vec<String>,
}

impl SurvivalDataset {
    /// Validates and wraps records. Requires n >= 2, at least one event,
    /// positive finite times and a common feature dimension.
    pub fn new(records: Vec<SurvivalRecord>, feature_names: Vec<String>) -> Result<Self> {
        let data = Self::new_unchecked_events(records, feature_names)?;
        if data.n_events() == 0 {
            return Err(Error::NoEvents);
        }
        Ok(data)
    }

    /// Like [`SurvivalDataset::new`] but accepts fully censored data. Used for
    /// held-out folds and subsets, where an all-censored slice is legal and
    /// individual metrics report their own undefined cases.
    pub fn new_unchecked_events(
        records: Vec<SurvivalRecord>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::TooFewRecords {
                required: 2,
                found: records.len(),
            });
        }
        let p = feature_names.len();
        for (row, r) in records.iter().enumerate() {
            if r.features.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.features.len(),
                });
            }
            if !(r.time > 0.0) || !r.time.is_finite() {
                return Err(Error::InvalidTime {
                    row,
                    value: r.time,
                });
            }
            if let Some(column) = r.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row, column });
            }
        }
        Ok(Self {
            records,
            feature_names,
        })
    }

    /// Builds a dataset with generated feature names `x1..xp`.
    pub fn from_records(records: Vec<SurvivalRecord>) -> Result<Self> {
        let p = records.first().map_or(0, |r| r.features.len());
        Self::new(records, default_feature_names(p))
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &SurvivalRecord {
        &self.records[i]
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.records[i].features
    }

    pub fn time(&self, i: usize) -> f64 {
        self.records[i].time
    }

    pub fn event(&self, i: usize) -> bool {
        self.records[i].event
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn n_censored(&self) -> usize {
        self.n() - self.n_events()
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Self::new_unchecked_events(records, self.feature_names.clone())
    }

    /// Same records with every feature vector replaced by `f(row)`.
    pub(crate) fn map_features<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let records = self
            .records
            .iter()
            .map(|r| SurvivalRecord::new(f(&r.features), r.time, r.event))
            .collect();
        Self {
            records,
            feature_names: self.feature_names.clone(),
        }
    }
}

pub fn default_feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| alloc::format!("x{j}")).collect()
}

/// Per-feature z-score transform. Constant columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    /// Population mean and standard deviation of every column.
    pub fn fit(data: &SurvivalDataset) -> Result<Self> {
        let n = data.n();
        if n < 2 {
            return Err(Error::TooFewRecords {
                required: 2,
                found: n,
            });
        }
        let p = data.p();
        let mut center = alloc::vec![0.0; p];
        for r in data.records() {
            for (c, v) in center.iter_mut().zip(&r.features) {
                *c += v;
            }
        }
        for c in &mut center {
            *c /= n as f64;
        }
        let mut var = alloc::vec![0.0; p];
        for r in data.records() {
            for ((s, v), c) in var.iter_mut().zip(&r.features).zip(&center) {
                let d = v - c;
                *s += d * d;
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n as f64);
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { center, scale })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .zip(&self.scale)
            .map(|((v, c), s)| (v - c) / s)
            .collect()
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.center)
            .zip(&self.scale)
            .map(|((v, c), s)| v * s + c)
            .collect()
    }

    pub fn apply(&self, data: &SurvivalDataset) -> Result<SurvivalDataset> {
        self.check_dim(data)?;
        Ok(data.map_features(|x| self.transform_row(x)))
    }

    pub fn invert(&self, data: &SurvivalDataset) -> Result<SurvivalDataset> {
        self.check_dim(data)?;
        Ok(data.map_features(|x| self.inverse_row(x)))
    }

    fn check_dim(&self, data: &SurvivalDataset) -> Result<()> {
        if data.p() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: data.p(),
            });
        }
        Ok(())
    }
}

/// Fold label for every record of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    n_folds: usize,
}

impl FoldAssignment {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn fold_of(&self, record: usize) -> usize {
        self.fold_of[record]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.n_folds];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded k-fold split stratified on the event indicator.
///
/// Events and censored records are shuffled separately and dealt round-robin;
/// the censored stream continues where the event stream stopped so overall
/// fold sizes differ by at most one.
pub fn kfold_split(data: &SurvivalDataset, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::invalid("n_folds must be at least 2"));
    }
    if data.n() < n_folds {
        return Err(Error::TooFewRecords {
            required: n_folds,
            found: data.n(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<usize> = (0..data.n()).filter(|&i| data.event(i)).collect();
    let mut censored: Vec<usize> = (0..data.n()).filter(|&i| !data.event(i)).collect();
    events.shuffle(&mut rng);
    censored.shuffle(&mut rng);

    let mut fold_of = alloc::vec![0; data.n()];
    for (slot, &i) in events.iter().chain(&censored).enumerate() {
        fold_of[i] = slot % n_folds;
    }
    Ok(FoldAssignment { fold_of, n_folds })
}

/// Seeded uniform sample of `cap` record indices (sorted), or all indices if
/// the dataset is not larger than `cap`.
pub fn subsample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    idx
}
