//! Rank-based individual fairness for censored data.
//!
//! For every anchor individual two ranked lists of the other individuals are
//! built: one from input-space similarity (features) and one from
//! output-space similarity (risk scores, down-weighted by the difference in
//! per-individual concordance). FNDCG@k is the mean, over anchors, of the DCG
//! of input-space gains read in output-space order divided by the ideal DCG.
//! Gains always come from the input-space similarities.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cox::RiskScores;
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Input,
    Output,
}

/// Dense row-major n x n similarity matrix with values in [0, 1].
/// Diagonal entries are never read by the ranking code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    kind: SimilarityKind,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_vec(n: usize, kind: SimilarityKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        Ok(Self { n, kind, values })
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, kind: SimilarityKind, mut f: F) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { n, kind, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every entry, keeping the kind.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            n: self.n,
            kind: self.kind,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Row-wise access to a similarity structure, so FNDCG@k can stream rows
/// without materializing an n x n matrix.
pub trait SimilarityRows {
    fn n(&self) -> usize;
    /// Writes similarities of every record to `anchor` into `out[..n]`.
    fn fill_row(&self, anchor: usize, out: &mut [f64]);
}

impl SimilarityRows for SimilarityMatrix {
    fn n(&self) -> usize {
        self.n
    }

    fn fill_row(&self, anchor: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(anchor));
    }
}

/// `exp(-||x_i - x_j||_2)` computed on demand.
#[derive(Debug, Clone, Copy)]
pub struct InputSimilarity<'a> {
    data: &'a SurvivalDataset,
}

impl<'a> InputSimilarity<'a> {
    pub fn new(data: &'a SurvivalDataset) -> Self {
        Self { data }
    }
}

impl SimilarityRows for InputSimilarity<'_> {
    fn n(&self) -> usize {
        self.data.n()
    }

    fn fill_row(&self, anchor: usize, out: &mut [f64]) {
        let xa = self.data.features(anchor);
        for (j, o) in out.iter_mut().enumerate() {
            *o = input_pair_similarity(xa, self.data.features(j));
        }
    }
}

/// Concordance-adjusted output similarity computed on demand.
#[derive(Debug, Clone)]
pub struct OutputSimilarity {
    scores: Vec<f64>,
    concordance: Option<Vec<f64>>,
}

impl OutputSimilarity {
    pub fn raw(scores: &RiskScores) -> Self {
        Self {
            scores: scores.values.clone(),
            concordance: None,
        }
    }

    pub fn adjusted(scores: &RiskScores, conc: &ConcordanceVector) -> Result<Self> {
        if scores.len() != conc.values.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                found: conc.values.len(),
            });
        }
        Ok(Self {
            scores: scores.values.clone(),
            concordance: Some(conc.values.clone()),
        })
    }
}

impl SimilarityRows for OutputSimilarity {
    fn n(&self) -> usize {
        self.scores.len()
    }

    fn fill_row(&self, anchor: usize, out: &mut [f64]) {
        let ra = self.scores[anchor];
        for (j, o) in out.iter_mut().enumerate() {
            *o = libm::exp(-(ra - self.scores[j]).abs());
        }
        if let Some(c) = &self.concordance {
            let ca = c[anchor];
            for (o, cj) in out.iter_mut().zip(c) {
                *o *= 1.0 - (ca - cj).abs();
            }
        }
    }
}

#[inline]
fn input_pair_similarity(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    libm::exp(-libm::sqrt(sq))
}

/// Input-space similarity `exp(-||x_i - x_j||_2)`; expects scaled features.
pub fn input_similarity(data: &SurvivalDataset) -> SimilarityMatrix {
    let n = data.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let s = input_pair_similarity(data.features(i), data.features(j));
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    SimilarityMatrix {
        n,
        kind: SimilarityKind::Input,
        values,
    }
}

/// Output-space similarity `exp(-|r_i - r_j|)` of risk scores.
pub fn output_similarity_raw(scores: &RiskScores) -> SimilarityMatrix {
    let r = &scores.values;
    SimilarityMatrix::from_fn(r.len(), SimilarityKind::Output, |i, j| {
        libm::exp(-(r[i] - r[j]).abs())
    })
}

/// Per-individual concordance. `undefined[g]` marks anchors with no
/// comparable partner; their value is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceVector {
    pub values: Vec<f64>,
    pub comparable: Vec<usize>,
    pub undefined: Vec<bool>,
}

impl ConcordanceVector {
    pub fn n_undefined(&self) -> usize {
        self.undefined.iter().filter(|u| **u).count()
    }
}

/// For each anchor `g`, the fraction of partners `g'` that are correctly
/// ordered, among partners where the member with the shorter time had an
/// observed event. Equal times are incomparable.
pub fn individual_concordance(scores: &RiskScores, data: &SurvivalDataset) -> Result<ConcordanceVector> {
    let n = data.n();
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.len(),
        });
    }
    let mut correct = vec![0usize; n];
    let mut comparable = vec![0usize; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let (short, long) = match data.time(a).total_cmp(&data.time(b)) {
                Ordering::Less => (a, b),
                Ordering::Greater => (b, a),
                Ordering::Equal => continue,
            };
            if !data.event(short) {
                continue;
            }
            comparable[a] += 1;
            comparable[b] += 1;
            if scores.get(long) < scores.get(short) {
                correct[a] += 1;
                correct[b] += 1;
            }
        }
    }
    let undefined: Vec<bool> = comparable.iter().map(|&c| c == 0).collect();
    let n_undef = undefined.iter().filter(|u| **u).count();
    if n_undef > 0 {
        log::warn!("{n_undef} individual(s) have no comparable pair; concordance set to 0");
    }
    let values = correct
        .iter()
        .zip(&comparable)
        .map(|(&c, &z)| if z == 0 { 0.0 } else { c as f64 / z as f64 })
        .collect();
    Ok(ConcordanceVector {
        values,
        comparable,
        undefined,
    })
}

/// `(1 - |C_i - C_j|) * raw(i, j)`.
pub fn output_similarity_adjusted(raw: &SimilarityMatrix, conc: &ConcordanceVector) -> Result<SimilarityMatrix> {
    let n = raw.n();
    if conc.values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: conc.values.len(),
        });
    }
    let c = &conc.values;
    Ok(SimilarityMatrix::from_fn(n, SimilarityKind::Output, |i, j| {
        (1.0 - (c[i] - c[j]).abs()) * raw.get(i, j)
    }))
}

/// Neighbours of `anchor` in descending similarity; ties by ascending index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedList {
    pub anchor: usize,
    pub order: Vec<usize>,
}

#[inline]
fn rank_cmp(row: &[f64], a: usize, b: usize) -> Ordering {
    row[b].total_cmp(&row[a]).then(a.cmp(&b))
}

pub fn rank_by_similarity(sim: &SimilarityMatrix, anchor: usize) -> Result<RankedList> {
    if sim.n() < 2 {
        return Err(Error::TooFewRecords {
            required: 2,
            found: sim.n(),
        });
    }
    if anchor >= sim.n() {
        return Err(Error::invalid("anchor index out of range"));
    }
    let row = sim.row(anchor);
    let mut order: Vec<usize> = (0..sim.n()).filter(|&j| j != anchor).collect();
    order.sort_by(|&a, &b| rank_cmp(row, a, b));
    Ok(RankedList { anchor, order })
}

#[inline]
pub(crate) fn discount(pos: usize) -> f64 {
    // pos is 1-based
    1.0 / libm::log2(pos as f64 + 1.0)
}

/// `sum_{pos=1..k} gains[order[pos]] / log2(pos + 1)`.
pub fn dcg_at_k(order: &RankedList, gains: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > order.order.len() {
        return Err(Error::KOutOfRange {
            k,
            max: order.order.len(),
        });
    }
    Ok(order.order[..k]
        .iter()
        .enumerate()
        .map(|(pos, &j)| gains[j] * discount(pos + 1))
        .sum())
}

/// Result of [`fndcg_at_k`]: the mean ratio and the anchors left out because
/// their ideal DCG is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fndcg {
    pub value: f64,
    pub per_anchor: Vec<Option<f64>>,
    pub skipped: usize,
}

/// Writes the `k` best candidates of `row` (excluding `anchor`) into
/// `top`, in rank order.
fn top_k(row: &[f64], anchor: usize, k: usize, scratch: &mut Vec<usize>, top: &mut Vec<usize>) {
    scratch.clear();
    scratch.extend((0..row.len()).filter(|&j| j != anchor));
    if k < scratch.len() {
        scratch.select_nth_unstable_by(k - 1, |&a, &b| rank_cmp(row, a, b));
        scratch.truncate(k);
    }
    scratch.sort_unstable_by(|&a, &b| rank_cmp(row, a, b));
    top.clear();
    top.extend_from_slice(&scratch[..k]);
}

/// FNDCG@k over two similarity structures of equal size.
pub fn fndcg_at_k<I, O>(sim_in: &I, sim_out: &O, k: usize) -> Result<Fndcg>
where
    I: SimilarityRows + ?Sized,
    O: SimilarityRows + ?Sized,
{
    let n = sim_in.n();
    if sim_out.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sim_out.n(),
        });
    }
    if n < 2 || k == 0 || k > n - 1 {
        return Err(Error::KOutOfRange {
            k,
            max: n.saturating_sub(1),
        });
    }
    let mut gains = vec![0.0; n];
    let mut out_row = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    let mut top = Vec::with_capacity(k);
    let mut per_anchor = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut used = 0usize;

    for anchor in 0..n {
        sim_in.fill_row(anchor, &mut gains);
        top_k(&gains, anchor, k, &mut scratch, &mut top);
        let ideal: f64 = top
            .iter()
            .enumerate()
            .map(|(pos, &j)| gains[j] * discount(pos + 1))
            .sum();
        if !(ideal > 0.0) {
            per_anchor.push(None);
            continue;
        }
        sim_out.fill_row(anchor, &mut out_row);
        top_k(&out_row, anchor, k, &mut scratch, &mut top);
        let dcg: f64 = top
            .iter()
            .enumerate()
            .map(|(pos, &j)| gains[j] * discount(pos + 1))
            .sum();
        let ratio = dcg / ideal;
        per_anchor.push(Some(ratio));
        total += ratio;
        used += 1;
    }
    let skipped = n - used;
    if used == 0 {
        return Err(Error::DegenerateSimilarity);
    }
    if skipped > 0 {
        log::warn!("FNDCG@{k}: skipped {skipped} anchor(s) with zero ideal DCG");
    }
    Ok(Fndcg {
        value: total / used as f64,
        per_anchor,
        skipped,
    })
}

/// FNDCG@k of a model on a dataset: input similarity from the (scaled)
/// features, output similarity from risk scores with the hard concordance
/// adjustment. Streams rows, so memory is O(n).
pub fn model_fndcg(data: &SurvivalDataset, scores: &RiskScores, k: usize) -> Result<Fndcg> {
    let conc = individual_concordance(scores, data)?;
    let out = OutputSimilarity::adjusted(scores, &conc)?;
    fndcg_at_k(&InputSimilarity::new(data), &out, k)
}

/// Mean over unordered pairs of `max(0, |r_a - r_b| - L ||x_a - x_b||)`,
/// with the derivative with respect to each risk score.
pub fn lipschitz_penalty_with_grad(data: &SurvivalDataset, scores: &RiskScores, lipschitz: f64) -> Result<(f64, Vec<f64>)> {
    let n = data.n();
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.len(),
        });
    }
    if !(lipschitz > 0.0) {
        return Err(Error::invalid("Lipschitz constant must be positive"));
    }
    let r = &scores.values;
    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    let mut pairs = 0usize;
    for a in 0..n {
        for b in (a + 1)..n {
            pairs += 1;
            let dist = libm::sqrt(
                data.features(a)
                    .iter()
                    .zip(data.features(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum(),
            );
            let gap = r[a] - r[b];
            let excess = gap.abs() - lipschitz * dist;
            if excess > 0.0 {
                total += excess;
                let s = gap.signum();
                grad[a] += s;
                grad[b] -= s;
            }
        }
    }
    let norm = pairs as f64;
    for g in &mut grad {
        *g /= norm;
    }
    Ok((total / norm, grad))
}

pub fn lipschitz_penalty(data: &SurvivalDataset, scores: &RiskScores, lipschitz: f64) -> Result<f64> {
    lipschitz_penalty_with_grad(data, scores, lipschitz).map(|(v, _)| v)
}
