use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::RetrievalResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: usize,
    /// Percent; 0 with `precision_undefined` set when the class was never predicted.
    pub precision: f64,
    pub recall: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Which corpus the numbers describe.
    pub dataset: String,
    pub per_class: Vec<ClassMetrics>,
    pub overall_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// k → percent of queries whose correct model is within the first k.
    pub topk_accuracy: BTreeMap<usize, f64>,
    /// `confusion[truth][prediction]`.
    pub confusion: Vec<Vec<usize>>,
}

fn pct(num: usize, den: usize) -> f64 {
    100.0 * num as f64 / den as f64
}

pub fn class_metrics(predictions: &[usize], truth: &[usize], classes: &[String]) -> Result<MetricsReport> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(Error::Validation(format!(
            "need equal nonempty label lists, got {} predictions and {} truths",
            predictions.len(),
            truth.len()
        )));
    }
    let m = classes.len();
    if let Some(&bad) = predictions.iter().chain(truth).find(|&&l| l >= m) {
        return Err(Error::Validation(format!("label {bad} out of range for {m} classes")));
    }
    let mut confusion = vec![vec![0usize; m]; m];
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let per_class: Vec<ClassMetrics> = (0..m)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..m).map(|t| confusion[t][c]).sum();
            ClassMetrics {
                class: classes[c].clone(),
                support,
                precision: if predicted == 0 { 0.0 } else { pct(tp, predicted) },
                recall: if support == 0 { 0.0 } else { pct(tp, support) },
                precision_undefined: predicted == 0,
                recall_undefined: support == 0,
            }
        })
        .collect();
    let correct: usize = (0..m).map(|c| confusion[c][c]).sum();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / m as f64;
    Ok(MetricsReport {
        dataset: String::new(),
        overall_accuracy: pct(correct, truth.len()),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        per_class,
        topk_accuracy: BTreeMap::new(),
        confusion,
    })
}

/// Percent of queries whose correct model appears in the first k results.
pub fn topk_accuracy(
    results: &[RetrievalResult],
    truth: &HashMap<String, String>,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if results.is_empty() {
        return Err(Error::Validation("no retrieval results".into()));
    }
    let mut ranks = Vec::with_capacity(results.len());
    for r in results {
        let want = truth
            .get(&r.query_id)
            .ok_or_else(|| Error::Validation(format!("no ground truth for query `{}`", r.query_id)))?;
        ranks.push(r.rank_of(want));
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
            (k, pct(hits, results.len()))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect_predictions() {
        let r = class_metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], &names(3)).unwrap();
        assert_eq!(r.overall_accuracy, 100.0);
        assert!(r.per_class.iter().all(|c| c.precision == 100.0 && c.recall == 100.0));
    }

    #[test]
    fn all_class_zero() {
        let r = class_metrics(&[0, 0, 0, 0], &[0, 0, 1, 1], &names(2)).unwrap();
        assert_eq!(r.overall_accuracy, 50.0);
        assert_eq!(r.per_class[1].recall, 0.0);
        assert!(r.per_class[1].precision_undefined);
        assert_eq!(r.per_class[0].precision, 50.0);
        assert!(class_metrics(&[0], &[0, 1], &names(2)).is_err());
    }

    #[test]
    fn hand_counted_three_class() {
        // truth   0 0 0 1 1 2 2 2 2
        // pred    0 1 0 1 2 2 2 0 2
        let r = class_metrics(&[0, 1, 0, 1, 2, 2, 2, 0, 2], &[0, 0, 0, 1, 1, 2, 2, 2, 2], &names(3)).unwrap();
        assert_eq!(r.confusion, vec![vec![2, 1, 0], vec![0, 1, 1], vec![1, 0, 3]]);
        assert!((r.per_class[0].precision - 200.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[2].recall - 75.0).abs() < 1e-12);
        assert!((r.overall_accuracy - 600.0 / 9.0).abs() < 1e-12);
    }

    fn result(q: &str, ids: &[&str]) -> RetrievalResult {
        RetrievalResult {
            query_id: q.into(),
            ranked: ids.iter().enumerate().map(|(i, s)| (s.to_string(), i as f64)).collect(),
        }
    }

    #[test]
    fn topk_arithmetic() {
        let mut truth = HashMap::new();
        let mut results = Vec::new();
        for i in 0..30 {
            let q = format!("q{i}");
            truth.insert(q.clone(), format!("m{i}"));
            let first = if i < 27 { format!("m{i}") } else { "x".into() };
            results.push(result(&q, &[&first, &format!("m{i}"), "y"]));
        }
        let acc = topk_accuracy(&results, &truth, &[1, 3, 5]).unwrap();
        assert!((acc[&1] - 90.0).abs() < 1e-12);
        assert_eq!(acc[&3], 100.0);
        truth.remove("q3");
        assert!(topk_accuracy(&results, &truth, &[1]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let r = class_metrics(&p, &t, &names(4)).unwrap();
            for c in 0..4 {
                let tp = pairs.iter().filter(|&&(a, b)| a == c && b == c).count();
                let fp = pairs.iter().filter(|&&(a, b)| a == c && b != c).count();
                let fn_ = pairs.iter().filter(|&&(a, b)| a != c && b == c).count();
                let prec = if tp + fp == 0 { 0.0 } else { 100.0 * tp as f64 / (tp + fp) as f64 };
                let rec = if tp + fn_ == 0 { 0.0 } else { 100.0 * tp as f64 / (tp + fn_) as f64 };
                prop_assert!((r.per_class[c].precision - prec).abs() < 1e-9);
                prop_assert!((r.per_class[c].recall - rec).abs() < 1e-9);
                prop_assert_eq!(r.confusion[c].iter().sum::<usize>(), tp + fn_);
            }
            let acc = 100.0 * pairs.iter().filter(|(a, b)| a == b).count() as f64 / pairs.len() as f64;
            prop_assert!((r.overall_accuracy - acc).abs() < 1e-9);
        }

        #[test]
        fn topk_is_monotone(ranks in proptest::collection::vec(0usize..8, 1..30)) {
            let mut truth = HashMap::new();
            let results: Vec<RetrievalResult> = ranks.iter().enumerate().map(|(i, &r)| {
                let q = format!("q{i}");
                truth.insert(q.clone(), "hit".to_string());
                let ids: Vec<String> = (0..8).map(|j| if j == r { "hit".into() } else { format!("o{j}") }).collect();
                let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
                result(&q, &refs)
            }).collect();
            let acc = topk_accuracy(&results, &truth, &[1, 3, 5]).unwrap();
            prop_assert!(acc[&1] <= acc[&3] && acc[&3] <= acc[&5]);
        }
    }
}
