mod common;

use common::{oracle_c_index, oracle_concordance, risk};
use fairsurv_core::cox::{kaplan_meier, neg_log_partial_likelihood};
use fairsurv_core::data::{kfold_split, FeatureScaler};
use fairsurv_core::eval::{brier_score_with, c_index, cumulative_dynamic_auc, CensoringWeights};
use fairsurv_core::fairness::{
    fndcg_at_k, individual_concordance, input_similarity, output_similarity_adjusted,
    output_similarity_raw,
};
use fairsurv_core::{CoxModel, RiskScores, SurvivalDataset, SurvivalRecord};
use proptest::prelude::*;

/// Records with distinct times drawn from a permutation, features in [-3, 3].
fn dataset(n: std::ops::Range<usize>, p: usize) -> impl Strategy<Value = SurvivalDataset> {
    n.prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, p), n),
            Just((1..=n).collect::<Vec<usize>>()).prop_shuffle(),
            prop::collection::vec(any::<bool>(), n),
        )
    })
    .prop_map(|(xs, perm, mut ev)| {
        ev[0] = true;
        let recs = xs
            .into_iter()
            .zip(perm)
            .zip(ev)
            .map(|((x, t), e)| SurvivalRecord::new(x, t as f64 * 0.5, e))
            .collect();
        SurvivalDataset::from_records(recs).unwrap()
    })
}

fn beta(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, p)
}

fn similarities(d: &SurvivalDataset, b: &[f64]) -> (fairsurv_core::SimilarityMatrix, fairsurv_core::SimilarityMatrix, fairsurv_core::SimilarityMatrix) {
    let scores = RiskScores::new(risk(b, d));
    let conc = individual_concordance(&scores, d).unwrap();
    let raw = output_similarity_raw(&scores);
    let adj = output_similarity_adjusted(&raw, &conc).unwrap();
    (input_similarity(d), raw, adj)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaler_standardizes_training_columns(d in dataset(3..40, 3)) {
        let s = FeatureScaler::fit(&d).unwrap();
        let z = s.apply(&d).unwrap();
        let n = d.n() as f64;
        for c in 0..d.p() {
            let col: Vec<f64> = (0..d.n()).map(|i| z.features(i)[c]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }
        let back = s.invert(&z).unwrap();
        for i in 0..d.n() {
            for (a, b) in back.features(i).iter().zip(d.features(i)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn folds_partition_indices(d in dataset(10..60, 1), folds in 2usize..6, seed in any::<u64>()) {
        let f = kfold_split(&d, folds, seed).unwrap();
        let mut all: Vec<usize> = (0..folds).flat_map(|k| f.test_indices(k)).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d.n()).collect::<Vec<_>>());
        for k in 0..folds {
            let mut both = f.test_indices(k);
            both.extend(f.train_indices(k));
            both.sort_unstable();
            prop_assert_eq!(both, (0..d.n()).collect::<Vec<_>>());
        }
        let sizes = f.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn similarities_lie_in_unit_interval(d in dataset(2..15, 2), b in beta(2)) {
        let (sin, raw, adj) = similarities(&d, &b);
        for ((x, r), a) in sin.values().iter().zip(raw.values()).zip(adj.values()) {
            prop_assert!((0.0..=1.0).contains(x));
            prop_assert!((0.0..=1.0).contains(r));
            prop_assert!((0.0..=1.0).contains(a));
            prop_assert!(a <= r);
        }
    }

    #[test]
    fn fndcg_depends_only_on_output_ranking(d in dataset(3..13, 2), b in beta(2), k in 1usize..12) {
        let (sin, _, adj) = similarities(&d, &b);
        let k = k.min(d.n() - 1);
        let base = fndcg_at_k(&sin, &adj, k).unwrap().value;
        let cube = adj.map(|v| v * v * v);
        // rounding can merge neighbours; only order-preserving cases count
        let row = |m: &fairsurv_core::SimilarityMatrix, i: usize| m.values()[i * d.n()..(i + 1) * d.n()].to_vec();
        let kept = (0..d.n()).all(|i| {
            let (a, c) = (row(&adj, i), row(&cube, i));
            (0..a.len()).all(|x| (0..a.len()).all(|y| (a[x] < a[y]) == (c[x] < c[y])))
        });
        prop_assume!(kept);
        let cubed = fndcg_at_k(&sin, &cube, k).unwrap().value;
        let halved = fndcg_at_k(&sin, &adj.map(|v| 0.5 * v), k).unwrap().value;
        prop_assert!((base - cubed).abs() < 1e-12);
        prop_assert!((base - halved).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&base));
    }

    #[test]
    fn fndcg_of_input_against_itself_is_one(d in dataset(3..15, 3), k in 1usize..14) {
        let sin = input_similarity(&d);
        let k = k.min(d.n() - 1);
        prop_assert!((fndcg_at_k(&sin, &sin, k).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_index_is_rank_invariant(d in dataset(3..30, 2), b in beta(2)) {
        let r = risk(&b, &d);
        let Ok(c) = c_index(&RiskScores::new(r.clone()), &d, false) else { return Ok(()); };
        let sq = c_index(&RiskScores::new(r.iter().map(|v| v * v).collect()), &d, false).unwrap();
        let shifted = c_index(&RiskScores::new(r.iter().map(|v| v + 10.0).collect()), &d, false).unwrap();
        prop_assert!((c - sq).abs() < 1e-12);
        prop_assert!((c - shifted).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn pooled_individual_concordance_is_c_index(d in dataset(3..30, 2), b in beta(2)) {
        let r = risk(&b, &d);
        let scores = RiskScores::new(r.clone());
        let conc = individual_concordance(&scores, &d).unwrap();
        let Ok(c) = c_index(&scores, &d, false) else { return Ok(()); };
        // each comparable pair is counted once by each of its two members
        let num: f64 = conc.values.iter().zip(&conc.comparable).map(|(v, m)| v * *m as f64).sum();
        let den: usize = conc.comparable.iter().sum();
        prop_assert!((num / den as f64 - c).abs() < 1e-12);
        prop_assert_eq!(c, oracle_c_index(&r, &d));
        prop_assert_eq!(&conc.values, &oracle_concordance(&r, &d));
    }

    #[test]
    fn brier_without_censoring_is_mean_squared_error(
        d in dataset(4..30, 2), b in beta(2), q in 0.1f64..0.9,
    ) {
        let recs = d.records().iter().map(|r| SurvivalRecord::new(r.features.clone(), r.time, true)).collect();
        let d = SurvivalDataset::from_records(recs).unwrap();
        let model = CoxModel::with_baseline(b.clone(), &d, None).unwrap();
        let mut times = d.times();
        times.sort_by(f64::total_cmp);
        let t = times[((times.len() - 1) as f64 * q) as usize];
        let w = CensoringWeights::fit(&d).unwrap();
        let v = brier_score_with(&model, &d, t, &w).unwrap();
        let mse = (0..d.n())
            .map(|i| {
                let s = model.survival(d.features(i), t).unwrap();
                let y = if d.time(i) > t { 1.0 } else { 0.0 };
                (y - s).powi(2)
            })
            .sum::<f64>() / d.n() as f64;
        prop_assert!((v - mse).abs() < 1e-12);
    }

    #[test]
    fn auc_without_censoring_is_classical_auc(d in dataset(4..30, 2), b in beta(2), q in 0.1f64..0.8) {
        let recs = d.records().iter().map(|r| SurvivalRecord::new(r.features.clone(), r.time, true)).collect();
        let d = SurvivalDataset::from_records(recs).unwrap();
        let r = risk(&b, &d);
        let mut times = d.times();
        times.sort_by(f64::total_cmp);
        let t = times[((times.len() - 2) as f64 * q) as usize];
        let w = CensoringWeights::fit(&d).unwrap();
        let v = cumulative_dynamic_auc(&RiskScores::new(r.clone()), &d, t, &w, false).unwrap();
        let cases: Vec<usize> = (0..d.n()).filter(|&i| d.time(i) <= t).collect();
        let controls: Vec<usize> = (0..d.n()).filter(|&i| d.time(i) > t).collect();
        let hits = cases.iter().flat_map(|&i| controls.iter().map(move |&j| (i, j))).filter(|&(i, j)| r[i] > r[j]).count();
        prop_assert!((v - hits as f64 / (cases.len() * controls.len()) as f64).abs() < 1e-12);
    }

    #[test]
    fn kaplan_meier_is_monotone_and_bounded(d in dataset(2..40, 1)) {
        let km = kaplan_meier(&d.times(), &d.events()).unwrap();
        let mut last = 1.0;
        for &(_, v) in &km.points {
            prop_assert!(v <= last + 1e-15);
            prop_assert!((0.0..=1.0).contains(&v));
            last = v;
        }
    }

    #[test]
    fn nll_is_non_negative_and_convex(d in dataset(3..20, 2), b1 in beta(2), b2 in beta(2)) {
        let f = |b: &[f64]| neg_log_partial_likelihood(b, &d).unwrap();
        let mid: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| 0.5 * (a + b)).collect();
        prop_assert!(f(&b1) >= 0.0);
        prop_assert!(f(&mid) <= 0.5 * (f(&b1) + f(&b2)) + 1e-10);
    }
}

#[test]
fn evaluation_is_deterministic() {
    use fairsurv_core::eval::{evaluate, EvalOptions};
    let s = fairsurv_core::synth::generate_synthetic(300, 2, &[1.0, -0.5], 0.3, 4).unwrap();
    let model = CoxModel::with_baseline(vec![0.9, -0.4], &s.data, None).unwrap();
    let opts = EvalOptions { subsample_cap: 100, ..Default::default() };
    let a = evaluate(&model, &s.data, &opts).unwrap();
    let b = evaluate(&model, &s.data, &opts).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.fndcg_subsample, Some(100));
    assert!(a.metrics.in_range());
}
