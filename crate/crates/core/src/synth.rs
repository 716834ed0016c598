//! Seeded synthetic proportional-hazards data.
//!
//! Features are i.i.d. standard normal, event times exponential with rate
//! `exp(beta' x)`, censoring times exponential with a common rate chosen so
//! the realized censoring fraction hits the request.

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{default_feature_names, SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};

/// Generation parameters and what was realized, for the ground-truth sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub beta_true: Vec<f64>,
    pub censor_rate: f64,
    pub censor_hazard: f64,
    pub realized_censor_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: SurvivalDataset,
    pub truth: SyntheticTruth,
}

pub fn generate_synthetic(
    n: usize,
    p: usize,
    beta_true: &[f64],
    censor_rate: f64,
    seed: u64,
) -> Result<Synthetic> {
    if beta_true.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: beta_true.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    censor_features(features, beta_true, censor_rate, &mut rng, seed)
}

/// Draws event and censoring times for given covariates and assembles the
/// dataset. Shared by all generators in this module.
fn censor_features(
    features: Vec<Vec<f64>>,
    beta_true: &[f64],
    censor_rate: f64,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<Synthetic> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewRecords {
            required: 2,
            found: n,
        });
    }
    if !(censor_rate > 0.0 && censor_rate < 1.0) {
        return Err(Error::invalid("censor_rate must lie in (0, 1)"));
    }

    let event_times: Vec<f64> = features
        .iter()
        .map(|x| {
            let e: f64 = Exp1.sample(rng);
            e / libm::exp(crate::dot(beta_true, x))
        })
        .collect();
    // censoring time = unit / hazard
    let units: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();

    // Censored iff unit / hazard < T, i.e. unit / T < hazard. The realized
    // fraction is a step function of the hazard; pick the midpoint between
    // the order statistics that bracket the requested count.
    let mut ratios: Vec<f64> = units
        .iter()
        .zip(&event_times)
        .map(|(u, t)| u / t)
        .collect();
    ratios.sort_by(f64::total_cmp);
    let target = libm::round(censor_rate * n as f64) as usize;
    let target = target.clamp(0, n - 1);
    let censor_hazard = if target == 0 {
        ratios[0] * 0.5
    } else {
        0.5 * (ratios[target - 1] + ratios[target])
    };

    let records: Vec<SurvivalRecord> = features
        .into_iter()
        .zip(&event_times)
        .zip(&units)
        .map(|((x, &t), &u)| {
            let c = u / censor_hazard;
            if c < t {
                SurvivalRecord::new(x, c, false)
            } else {
                SurvivalRecord::new(x, t, true)
            }
        })
        .collect();
    let p = beta_true.len();
    let data = SurvivalDataset::new(records, default_feature_names(p))?;
    let realized = data.n_censored() as f64 / n as f64;
    Ok(Synthetic {
        data,
        truth: SyntheticTruth {
            beta_true: beta_true.to_vec(),
            censor_rate,
            censor_hazard,
            realized_censor_rate: realized,
            seed,
        },
    })
}

/// Parameters of the planted-misalignment generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisalignmentSpec {
    pub n: usize,
    pub clusters: usize,
    /// spacing between adjacent cluster centres on the cluster axis
    pub separation: f64,
    /// within-cluster standard deviation on the cluster axis
    pub spread: f64,
    /// coefficient of the prognostic feature
    pub effect: f64,
    pub censor_rate: f64,
    /// relative cluster sizes; empty means equal
    pub cluster_weights: Vec<f64>,
}

impl Default for MisalignmentSpec {
    fn default() -> Self {
        Self {
            n: 300,
            clusters: 2,
            separation: 4.0,
            spread: 0.3,
            effect: 1.0,
            censor_rate: 0.7,
            cluster_weights: alloc::vec![3.0, 1.0],
        }
    }
}

/// Data whose input-space neighbourhoods disagree with its risk structure.
///
/// Feature `x1` is prognostic (standard normal, coefficient `effect`);
/// feature `x2` places each record in one of `clusters` tight groups and has
/// no effect on survival. After scaling, nearest input-space neighbours are
/// mostly cluster-mates, while an accuracy-only Cox fit orders risk by `x1`
/// alone and mixes clusters.
pub fn generate_planted_misalignment(spec: &MisalignmentSpec, seed: u64) -> Result<Synthetic> {
    if spec.clusters == 0 {
        return Err(Error::invalid("need at least one cluster"));
    }
    let weights = if spec.cluster_weights.is_empty() {
        alloc::vec![1.0; spec.clusters]
    } else if spec.cluster_weights.len() == spec.clusters {
        spec.cluster_weights.clone()
    } else {
        return Err(Error::invalid("need one weight per cluster"));
    };
    let pick = WeightedIndex::new(&weights).map_err(|_| Error::invalid("cluster weights must be positive"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = (spec.clusters as f64 - 1.0) / 2.0;
    let features: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| {
            let prognostic: f64 = rng.sample(StandardNormal);
            let cluster = pick.sample(&mut rng) as f64;
            let noise: f64 = rng.sample(StandardNormal);
            let axis = (cluster - mid) * spec.separation + spec.spread * noise;
            alloc::vec![prognostic, axis]
        })
        .collect();
    censor_features(
        features,
        &[spec.effect, 0.0],
        spec.censor_rate,
        &mut rng,
        seed,
    )
}
