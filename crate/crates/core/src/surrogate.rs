//! Differentiable relaxation of FNDCG@k.
//!
//! Exact FNDCG@k depends on the coefficients only through rankings, so it is
//! piecewise constant. The relaxation replaces every hard comparison with a
//! logistic sigmoid of temperature `tau`:
//!
//! - concordance: `1[r_long < r_short]` becomes `sigma((r_short - r_long) / tau)`
//! - output rank of neighbour `j` of anchor `i`:
//!   `rank_j = 1 + sum_{l != i, j} sigma((A_il - A_ij) / tau)`
//! - top-k truncation: `1[rank_j <= k]` becomes `sigma((k + 1/2 - rank_j) / tau)`
//!
//! where `A` is the concordance-adjusted output similarity. Per anchor the
//! relaxed DCG is `sum_j g_ij * gate_j / log2(rank_j + 1)` with input-space
//! gains `g`, divided by the ideal DCG@k. As `tau -> 0` every relaxed quantity
//! approaches its hard counterpart and the value approaches exact FNDCG@k.
//!
//! The gradient is computed by a hand-written reverse pass over the same
//! quantities; it costs O(m^3) for a batch of m records.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::fairness::{discount, input_similarity, SimilarityMatrix};
use crate::sigmoid;

/// Coefficient-independent data for one batch.
#[derive(Debug, Clone)]
pub struct SurrogateBatch {
    m: usize,
    k: usize,
    gains: SimilarityMatrix,
    ideal: Vec<f64>,
    /// comparable pairs as (shorter, longer)
    pairs: Vec<(usize, usize)>,
    /// comparable-pair count per record
    norm: Vec<f64>,
    features: Vec<Vec<f64>>,
}

impl SurrogateBatch {
    /// Prepares a batch using input similarities computed from its features.
    pub fn new(batch: &SurvivalDataset, k: usize) -> Result<Self> {
        let sim = input_similarity(batch);
        Self::with_similarity(batch, sim, k)
    }

    /// `sim_in` must be the input similarity restricted to the batch.
    /// `k` larger than `m - 1` is clamped.
    pub fn with_similarity(batch: &SurvivalDataset, sim_in: SimilarityMatrix, k: usize) -> Result<Self> {
        let m = batch.n();
        if sim_in.n() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: sim_in.n(),
            });
        }
        if k == 0 {
            return Err(Error::KOutOfRange { k, max: m - 1 });
        }
        let k = if k > m - 1 {
            log::info!("surrogate: batch of {m} too small for k={k}; clamping to {}", m - 1);
            m - 1
        } else {
            k
        };

        let mut ideal = vec![0.0; m];
        let mut sorted = Vec::with_capacity(m);
        for (i, slot) in ideal.iter_mut().enumerate() {
            sorted.clear();
            sorted.extend((0..m).filter(|&j| j != i).map(|j| sim_in.get(i, j)));
            sorted.sort_by(|a, b| b.total_cmp(a));
            *slot = sorted[..k]
                .iter()
                .enumerate()
                .map(|(pos, g)| g * discount(pos + 1))
                .sum();
        }

        let mut pairs = Vec::new();
        let mut norm = vec![0.0; m];
        for a in 0..m {
            for b in (a + 1)..m {
                let (s, l) = match batch.time(a).total_cmp(&batch.time(b)) {
                    Ordering::Less => (a, b),
                    Ordering::Greater => (b, a),
                    Ordering::Equal => continue,
                };
                if batch.event(s) {
                    pairs.push((s, l));
                    norm[s] += 1.0;
                    norm[l] += 1.0;
                }
            }
        }

        Ok(Self {
            m,
            k,
            gains: sim_in,
            ideal,
            pairs,
            norm,
            features: batch.records().iter().map(|r| r.features.clone()).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Surrogate value and its gradient with respect to `beta`.
    pub fn value_and_grad(&self, beta: &[f64], tau: f64) -> Result<(f64, Vec<f64>)> {
        self.evaluate(beta, tau, true)
    }

    pub fn value(&self, beta: &[f64], tau: f64) -> Result<f64> {
        self.evaluate(beta, tau, false).map(|(v, _)| v)
    }

    fn evaluate(&self, beta: &[f64], tau: f64, want_grad: bool) -> Result<(f64, Vec<f64>)> {
        if !(tau > 0.0) {
            return Err(Error::invalid("surrogate temperature must be positive"));
        }
        let p = beta.len();
        if let Some(f) = self.features.first() {
            if f.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: f.len(),
                    found: p,
                });
            }
        }
        let m = self.m;
        let k = self.k as f64;
        let risk: Vec<f64> = self
            .features
            .iter()
            .map(|x| libm::exp(crate::dot(beta, x)))
            .collect();

        // soft per-record concordance
        let pair_sig: Vec<f64> = self
            .pairs
            .iter()
            .map(|&(s, l)| sigmoid((risk[s] - risk[l]) / tau))
            .collect();
        let mut conc = vec![0.0; m];
        for (&(s, l), &sg) in self.pairs.iter().zip(&pair_sig) {
            conc[s] += sg;
            conc[l] += sg;
        }
        for (c, z) in conc.iter_mut().zip(&self.norm) {
            if *z > 0.0 {
                *c /= z;
            }
        }

        let mut base = vec![0.0; m * m];
        let mut adj = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let e = libm::exp(-(risk[i] - risk[j]).abs());
                base[i * m + j] = e;
                adj[i * m + j] = (1.0 - (conc[i] - conc[j]).abs()) * e;
            }
        }

        let used = self.ideal.iter().filter(|&&d| d > 0.0).count();
        if used == 0 {
            return Err(Error::DegenerateSimilarity);
        }
        let inv_used = 1.0 / used as f64;

        let mut total = 0.0;
        let mut bar_adj = vec![0.0; if want_grad { m * m } else { 0 }];
        let mut rank = vec![0.0; m];
        let mut bar_rank = vec![0.0; m];
        let mut pair_s = vec![0.0; if want_grad { m * m } else { 0 }];

        for i in 0..m {
            let ideal = self.ideal[i];
            if !(ideal > 0.0) {
                continue;
            }
            let row = &adj[i * m..(i + 1) * m];
            rank.iter_mut().for_each(|r| *r = 1.0);
            for j in 0..m {
                if j == i {
                    continue;
                }
                for l in (j + 1)..m {
                    if l == i {
                        continue;
                    }
                    // probability that l outranks j
                    let s = sigmoid((row[l] - row[j]) / tau);
                    rank[j] += s;
                    rank[l] += 1.0 - s;
                    if want_grad {
                        pair_s[j * m + l] = s;
                    }
                }
            }

            let scale = inv_used / ideal;
            let mut dcg = 0.0;
            for j in 0..m {
                if j == i {
                    continue;
                }
                let g = self.gains.get(i, j);
                let gate = sigmoid((k + 0.5 - rank[j]) / tau);
                let lg = libm::log2(rank[j] + 1.0);
                let disc = 1.0 / lg;
                dcg += g * gate * disc;
                if want_grad {
                    let d_gate = -gate * (1.0 - gate) / tau;
                    let d_disc = -1.0 / ((rank[j] + 1.0) * core::f64::consts::LN_2 * lg * lg);
                    bar_rank[j] = scale * g * (d_gate * disc + gate * d_disc);
                }
            }
            total += dcg * scale;

            if want_grad {
                let bar_row = &mut bar_adj[i * m..(i + 1) * m];
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    for l in (j + 1)..m {
                        if l == i {
                            continue;
                        }
                        let s = pair_s[j * m + l];
                        let q = s * (1.0 - s) / tau * (bar_rank[j] - bar_rank[l]);
                        bar_row[l] += q;
                        bar_row[j] -= q;
                    }
                }
            }
        }

        if !want_grad {
            return Ok((total, Vec::new()));
        }

        let mut bar_risk = vec![0.0; m];
        let mut bar_conc = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let ba = bar_adj[i * m + j];
                if ba == 0.0 {
                    continue;
                }
                let e = base[i * m + j];
                let dc = conc[i] - conc[j];
                let sc = sign(dc);
                bar_conc[i] -= ba * e * sc;
                bar_conc[j] += ba * e * sc;
                let bar_e = ba * (1.0 - dc.abs());
                let sr = sign(risk[i] - risk[j]);
                bar_risk[i] -= bar_e * e * sr;
                bar_risk[j] += bar_e * e * sr;
            }
        }
        for (&(s, l), &sg) in self.pairs.iter().zip(&pair_sig) {
            let bar_sig = bar_conc[s] / self.norm[s] + bar_conc[l] / self.norm[l];
            let d = bar_sig * sg * (1.0 - sg) / tau;
            bar_risk[s] += d;
            bar_risk[l] -= d;
        }

        let mut grad = vec![0.0; p];
        for ((x, br), r) in self.features.iter().zip(&bar_risk).zip(&risk) {
            let w = br * r;
            for (g, xv) in grad.iter_mut().zip(x) {
                *g += w * xv;
            }
        }
        Ok((total, grad))
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Surrogate FNDCG@k of `beta` on a batch, with input similarities from the
/// batch's features.
pub fn fairness_surrogate(beta: &[f64], batch: &SurvivalDataset, k: usize, tau: f64) -> Result<f64> {
    SurrogateBatch::new(batch, k)?.value(beta, tau)
}

pub fn fairness_surrogate_with_grad(
    beta: &[f64],
    batch: &SurvivalDataset,
    k: usize,
    tau: f64,
) -> Result<(f64, Vec<f64>)> {
    SurrogateBatch::new(batch, k)?.value_and_grad(beta, tau)
}
