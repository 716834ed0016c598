//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here is written from the defining formulas with explicit loops
//! and full sorts, without calling the library routines it checks.
#![allow(dead_code)]

use fairsurv_core::{SurvivalDataset, SurvivalRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random censored instance: normal features, exponential times with
/// continuous values (no ties), each record censored with probability
/// `censor`. At least one event is forced.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize, censor: f64) -> SurvivalDataset {
    let mut records: Vec<SurvivalRecord> = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
            let t = -rng.random::<f64>().max(1e-12).ln() + 1e-6;
            let event = rng.random::<f64>() >= censor;
            SurvivalRecord::new(x, t, event)
        })
        .collect();
    if !records.iter().any(|r| r.event) {
        records[0].event = true;
    }
    SurvivalDataset::from_records(records).unwrap()
}

pub fn random_beta(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| normal(rng)).collect()
}

pub fn eta(beta: &[f64], x: &[f64]) -> f64 {
    beta.iter().zip(x).map(|(b, v)| b * v).sum()
}

/// Negative log partial likelihood by explicit risk-set enumeration.
pub fn oracle_nll(beta: &[f64], d: &SurvivalDataset) -> f64 {
    let mut total = 0.0;
    for i in 0..d.n() {
        if !d.event(i) {
            continue;
        }
        let denom: f64 = (0..d.n())
            .filter(|&j| d.time(j) >= d.time(i))
            .map(|j| eta(beta, d.features(j)).exp())
            .sum();
        total -= eta(beta, d.features(i)) - denom.ln();
    }
    total
}

/// Gradient and Hessian of the negative log partial likelihood.
pub fn oracle_grad_hess(beta: &[f64], d: &SurvivalDataset) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = beta.len();
    let mut g = vec![0.0; p];
    let mut h = vec![vec![0.0; p]; p];
    for i in 0..d.n() {
        if !d.event(i) {
            continue;
        }
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![vec![0.0; p]; p];
        for j in 0..d.n() {
            if d.time(j) < d.time(i) {
                continue;
            }
            let w = eta(beta, d.features(j)).exp();
            let x = d.features(j);
            s0 += w;
            for a in 0..p {
                s1[a] += w * x[a];
                for b in 0..p {
                    s2[a][b] += w * x[a] * x[b];
                }
            }
        }
        let xi = d.features(i);
        for a in 0..p {
            g[a] -= xi[a] - s1[a] / s0;
            for b in 0..p {
                h[a][b] += s2[a][b] / s0 - s1[a] * s1[b] / (s0 * s0);
            }
        }
    }
    (g, h)
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Full-data partial-likelihood maximizer by damped Newton iterations.
pub fn newton_optimum(d: &SurvivalDataset) -> (Vec<f64>, f64) {
    let p = d.p();
    let mut beta = vec![0.0; p];
    let mut f = oracle_nll(&beta, d);
    for _ in 0..100 {
        let (g, h) = oracle_grad_hess(&beta, d);
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10 {
            break;
        }
        let step = solve(h, g.iter().map(|v| -v).collect());
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let fc = oracle_nll(&cand, d);
            if fc <= f || t < 1e-10 {
                beta = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    (beta, f)
}

/// Central finite-difference gradient.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

/// `max|a - b| / max(max|b|, floor)`
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(floor, f64::max);
    diff / scale
}

pub fn risk(beta: &[f64], d: &SurvivalDataset) -> Vec<f64> {
    (0..d.n()).map(|i| eta(beta, d.features(i)).exp()).collect()
}

/// Per-individual concordance by enumerating partners of each anchor.
pub fn oracle_concordance(r: &[f64], d: &SurvivalDataset) -> Vec<f64> {
    let n = d.n();
    (0..n)
        .map(|g| {
            let mut num = 0usize;
            let mut den = 0usize;
            for h in 0..n {
                if h == g || d.time(h) == d.time(g) {
                    continue;
                }
                let (short, long) = if d.time(g) < d.time(h) { (g, h) } else { (h, g) };
                if !d.event(short) {
                    continue;
                }
                den += 1;
                if r[long] < r[short] {
                    num += 1;
                }
            }
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        })
        .collect()
}

/// Harrell's C-index over all ordered pairs.
pub fn oracle_c_index(r: &[f64], d: &SurvivalDataset) -> f64 {
    let mut num = 0usize;
    let mut den = 0usize;
    for i in 0..d.n() {
        if !d.event(i) {
            continue;
        }
        for j in 0..d.n() {
            if d.time(j) > d.time(i) {
                den += 1;
                if r[j] < r[i] {
                    num += 1;
                }
            }
        }
    }
    num as f64 / den as f64
}

pub fn oracle_input_sim(d: &SurvivalDataset) -> Vec<Vec<f64>> {
    let n = d.n();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let s: f64 = d
                        .features(i)
                        .iter()
                        .zip(d.features(j))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    (-s.sqrt()).exp()
                })
                .collect()
        })
        .collect()
}

pub fn oracle_output_sim(r: &[f64], c: &[f64]) -> Vec<Vec<f64>> {
    let n = r.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (1.0 - (c[i] - c[j]).abs()) * (-(r[i] - r[j]).abs()).exp())
                .collect()
        })
        .collect()
}

fn sorted_neighbours(row: &[f64], anchor: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| j != anchor).collect();
    idx.sort_by(|&a, &b| {
        row[b]
            .partial_cmp(&row[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx
}

/// FNDCG@k by full sorts and explicit DCG sums.
pub fn oracle_fndcg(sim_in: &[Vec<f64>], sim_out: &[Vec<f64>], k: usize) -> f64 {
    let n = sim_in.len();
    let mut total = 0.0;
    let mut used = 0;
    for a in 0..n {
        let by_out = sorted_neighbours(&sim_out[a], a);
        let by_in = sorted_neighbours(&sim_in[a], a);
        let mut dcg = 0.0;
        let mut ideal = 0.0;
        for pos in 1..=k {
            let disc = ((pos + 1) as f64).log2();
            dcg += sim_in[a][by_out[pos - 1]] / disc;
            ideal += sim_in[a][by_in[pos - 1]] / disc;
        }
        if ideal > 0.0 {
            total += dcg / ideal;
            used += 1;
        }
    }
    total / used as f64
}

/// Kaplan-Meier of the censoring distribution evaluated at `t`; with
/// `left`, the limit from the left.
pub fn oracle_censoring_km(d: &SurvivalDataset, t: f64, left: bool) -> f64 {
    let mut times: Vec<f64> = d
        .records()
        .iter()
        .filter(|r| !r.event)
        .map(|r| r.time)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut g = 1.0;
    for u in times {
        if (left && u >= t) || (!left && u > t) {
            break;
        }
        let at_risk = d.records().iter().filter(|r| r.time >= u).count() as f64;
        let cens = d.records().iter().filter(|r| r.time == u && !r.event).count() as f64;
        g *= 1.0 - cens / at_risk;
    }
    g
}

/// IPCW Brier score at `t` for predicted survival probabilities `s`.
pub fn oracle_brier(s: &[f64], d: &SurvivalDataset, t: f64) -> f64 {
    let mut total = 0.0;
    for (i, r) in d.records().iter().enumerate() {
        if r.time <= t && r.event {
            total += s[i].powi(2) / oracle_censoring_km(d, r.time, true);
        } else if r.time > t {
            total += (1.0 - s[i]).powi(2) / oracle_censoring_km(d, t, false);
        }
    }
    total / d.n() as f64
}

/// Cumulative/dynamic AUC at `t` by enumerating case/control pairs.
pub fn oracle_auc(r: &[f64], d: &SurvivalDataset, t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d.n() {
        if !(d.event(i) && d.time(i) <= t) {
            continue;
        }
        let w = 1.0 / oracle_censoring_km(d, d.time(i), true);
        for j in 0..d.n() {
            if d.time(j) > t {
                den += w;
                if r[i] > r[j] {
                    num += w;
                }
            }
        }
    }
    num / den
}
