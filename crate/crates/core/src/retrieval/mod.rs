//! Feature catalog, exhaustive Euclidean k-NN, distance tables and the
//! positive/negative match rule.

mod io;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{catalog_sidecar_path, decode_catalog, encode_catalog, read_catalog, write_catalog, CATALOG_MAGIC};

use crate::datasets::Provenance;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::nn::FeatureVector;
use crate::render::RenderConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub model_id: String,
    pub class_label: String,
    pub feature: FeatureVector,
    pub provenance: Provenance,
}

/// Where catalog features came from, so queries can be embedded the same way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogMeta {
    pub checkpoint_path: Option<String>,
    pub checkpoint_sha256: Option<String>,
    pub render: Option<RenderConfig>,
    pub point_count: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    width: usize,
    pub meta: CatalogMeta,
}

impl Catalog {
    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn get(&self, model_id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.model_id == model_id)
    }
}

pub fn build_catalog(entries: Vec<CatalogEntry>) -> Result<Catalog> {
    let width = entries
        .first()
        .ok_or_else(|| Error::Validation("catalog needs at least one entry".into()))?
        .feature
        .len();
    let mut seen = HashSet::new();
    for e in &entries {
        if !seen.insert(e.model_id.as_str()) {
            return Err(Error::Conflict(e.model_id.clone()));
        }
        if e.feature.len() != width {
            return Err(Error::Shape(format!(
                "entry `{}` has width {}, catalog width is {width}",
                e.model_id,
                e.feature.len()
            )));
        }
        if e.feature.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("entry `{}` has non-finite features", e.model_id)));
        }
    }
    Ok(Catalog {
        entries,
        width,
        meta: CatalogMeta::default(),
    })
}

/// Euclidean distance accumulated in f64.
pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub ranked: Vec<(String, f64)>,
}

impl RetrievalResult {
    /// 1-based rank of `model_id`, if retrieved.
    pub fn rank_of(&self, model_id: &str) -> Option<usize> {
        self.ranked.iter().position(|(id, _)| id == model_id).map(|p| p + 1)
    }
}

fn check_width(cat: &Catalog, f: &FeatureVector) -> Result<()> {
    if f.len() != cat.width {
        return Err(Error::Shape(format!(
            "query `{}` has width {}, catalog width is {}",
            f.source_id,
            f.len(),
            cat.width
        )));
    }
    Ok(())
}

/// Top-`k` entries by distance; ties keep catalog insertion order.
pub fn query(cat: &Catalog, f: &FeatureVector, k: usize) -> Result<RetrievalResult> {
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    check_width(cat, f)?;
    let mut scored: Vec<(usize, f64)> = cat
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (i, euclidean(&f.values, &e.feature.values)))
        .collect();
    // stable sort keeps insertion order among equal distances
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    scored.truncate(k);
    Ok(RetrievalResult {
        query_id: f.source_id.clone(),
        ranked: scored
            .into_iter()
            .map(|(i, d)| (cat.entries[i].model_id.clone(), d))
            .collect(),
    })
}

pub fn query_batch(cat: &Catalog, queries: &[FeatureVector], k: usize, exec: Exec) -> Result<Vec<RetrievalResult>> {
    exec.try_map(queries, |q| query(cat, q, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySummary {
    pub query_id: String,
    pub min: f64,
    pub mean: f64,
    pub nearest: String,
}

/// Full query × catalog distance matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTable {
    pub query_ids: Vec<String>,
    pub catalog_ids: Vec<String>,
    pub distances: Vec<f64>,
    pub summary: Vec<QuerySummary>,
}

impl DistanceTable {
    pub fn at(&self, q: usize, c: usize) -> f64 {
        self.distances[q * self.catalog_ids.len() + c]
    }

    /// Long format: `query_id,model_id,distance`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("query_id,model_id,distance\n");
        for (qi, q) in self.query_ids.iter().enumerate() {
            for (ci, c) in self.catalog_ids.iter().enumerate() {
                s.push_str(&format!("{q},{c},{}\n", self.at(qi, ci)));
            }
        }
        s
    }

    /// `query_id,nearest,min,mean`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("query_id,nearest,min,mean\n");
        for r in &self.summary {
            s.push_str(&format!("{},{},{},{}\n", r.query_id, r.nearest, r.min, r.mean));
        }
        s
    }
}

pub fn pairwise_distances(cat: &Catalog, queries: &[CatalogEntry], exec: Exec) -> Result<DistanceTable> {
    for q in queries {
        check_width(cat, &q.feature)?;
    }
    let rows: Vec<Vec<f64>> = exec.map(queries, |q| {
        cat.entries
            .iter()
            .map(|e| euclidean(&q.feature.values, &e.feature.values))
            .collect()
    });
    let summary = queries
        .iter()
        .zip(&rows)
        .map(|(q, r)| {
            let (imin, min) = r
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |b, (i, d)| if d < b.1 { (i, d) } else { b });
            QuerySummary {
                query_id: q.model_id.clone(),
                min,
                mean: r.iter().sum::<f64>() / r.len() as f64,
                nearest: cat.entries[imin].model_id.clone(),
            }
        })
        .collect();
    Ok(DistanceTable {
        query_ids: queries.iter().map(|q| q.model_id.clone()).collect(),
        catalog_ids: cat.entries.iter().map(|e| e.model_id.clone()).collect(),
        distances: rows.concat(),
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Match {
    Positive,
    Negative,
}

impl fmt::Display for Match {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Match::Positive => "positive",
            Match::Negative => "negative",
        })
    }
}

/// Inclusive boundary: a distance equal to the threshold is a positive.
pub fn match_decision(d: f64, threshold: f64) -> Match {
    if d <= threshold {
        Match::Positive
    } else {
        Match::Negative
    }
}

/// F1 of the rule `d <= threshold` on labeled distances.
pub fn f1_score(positives: &[f64], negatives: &[f64], threshold: f64) -> f64 {
    let tp = positives.iter().filter(|&&d| d <= threshold).count() as f64;
    let fp = negatives.iter().filter(|&&d| d <= threshold).count() as f64;
    let fn_ = positives.len() as f64 - tp;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

/// Threshold maximizing F1 on labeled distances. Candidates sit midway
/// between consecutive observed distances; the lowest best candidate wins.
pub fn calibrate_threshold(positives: &[f64], negatives: &[f64]) -> Result<(f64, f64)> {
    if positives.is_empty() {
        return Err(Error::Validation("threshold calibration needs positive examples".into()));
    }
    let mut all: Vec<f64> = positives.iter().chain(negatives).copied().collect();
    if all.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::Validation("distances must be finite and nonnegative".into()));
    }
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut best = (f64::NAN, -1.0);
    for (i, &v) in all.iter().enumerate() {
        let t = match all.get(i + 1) {
            Some(&next) => 0.5 * (v + next),
            None => v,
        }
        .max(f64::MIN_POSITIVE);
        let f1 = f1_score(positives, negatives, t);
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Modality;
    use proptest::prelude::*;

    pub(crate) fn entry(id: &str, v: Vec<f32>) -> CatalogEntry {
        CatalogEntry {
            model_id: id.into(),
            class_label: "c".into(),
            feature: FeatureVector {
                values: v,
                modality: Modality::Joint,
                source_id: id.into(),
            },
            provenance: Provenance::Cad,
        }
    }

    #[test]
    fn three_four_five() {
        let cat = build_catalog(vec![entry("a", vec![0.0, 0.0]), entry("b", vec![3.0, 4.0])]).unwrap();
        assert_eq!(cat.len(), 2);
        let r = query(&cat, &entry("q", vec![0.0, 0.0]).feature, 2).unwrap();
        assert_eq!(r.ranked, vec![("a".to_string(), 0.0), ("b".to_string(), 5.0)]);
        let all = query(&cat, &entry("q", vec![3.0, 4.0]).feature, 10).unwrap();
        assert_eq!(all.ranked[0], ("b".to_string(), 0.0));
        assert_eq!(all.ranked.len(), 2);
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!(
            build_catalog(vec![entry("a", vec![0.0]), entry("a", vec![1.0])]),
            Err(Error::Conflict(_))
        ));
        assert!(matches!(
            build_catalog(vec![entry("a", vec![0.0; 256]), entry("b", vec![1.0; 512])]),
            Err(Error::Shape(_))
        ));
        let cat = build_catalog(vec![entry("a", vec![0.0; 2])]).unwrap();
        assert!(matches!(query(&cat, &entry("q", vec![0.0; 3]).feature, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn ties_follow_insertion_order() {
        let cat = build_catalog(vec![
            entry("z", vec![1.0, 0.0]),
            entry("y", vec![0.0, 1.0]),
            entry("x", vec![-1.0, 0.0]),
        ])
        .unwrap();
        let r = query(&cat, &entry("q", vec![0.0, 0.0]).feature, 3).unwrap();
        let ids: Vec<&str> = r.ranked.iter().map(|(i, _)| i.as_str()).collect();
        assert_eq!(ids, ["z", "y", "x"]);
    }

    #[test]
    fn match_rule_examples() {
        assert_eq!(match_decision(0.0, 0.1), Match::Positive);
        assert_eq!(match_decision(10.0, 10.0), Match::Positive);
        assert_eq!(match_decision(14.0, 10.0), Match::Negative);
    }

    #[test]
    fn calibration_separates_clean_sets() {
        let (t, f1) = calibrate_threshold(&[1.0, 2.0, 3.0], &[5.0, 6.0]).unwrap();
        assert_eq!(f1, 1.0);
        assert_eq!(t, 4.0);
        let (_, f1) = calibrate_threshold(&[1.0, 5.0], &[2.0]).unwrap();
        assert!((f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pairwise_self_table() {
        let es = vec![entry("a", vec![0.0, 1.0]), entry("b", vec![2.0, 0.5]), entry("c", vec![-1.0, 3.0])];
        let cat = build_catalog(es.clone()).unwrap();
        let t = pairwise_distances(&cat, &es, Exec::Sequential).unwrap();
        for i in 0..3 {
            assert_eq!(t.at(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(t.at(i, j), t.at(j, i));
            }
        }
        assert_eq!(t.summary[1].nearest, "b");
        assert_eq!(t.to_csv().lines().count(), 10);
    }

    proptest! {
        #[test]
        fn triangle_inequality(v in proptest::collection::vec(-10f32..10.0, 12)) {
            let (a, rest) = v.split_at(4);
            let (b, c) = rest.split_at(4);
            prop_assert!(euclidean(a, c) <= euclidean(a, b) + euclidean(b, c) + 1e-9);
            prop_assert_eq!(euclidean(a, b), euclidean(b, a));
            prop_assert_eq!(euclidean(a, a), 0.0);
        }

        #[test]
        fn f1_of_calibrated_threshold_is_maximal(
            pos in proptest::collection::vec(0f64..10.0, 1..20),
            neg in proptest::collection::vec(0f64..10.0, 0..20),
            probe in 0f64..12.0,
        ) {
            let (t, best) = calibrate_threshold(&pos, &neg).unwrap();
            prop_assert_eq!(f1_score(&pos, &neg, t), best);
            prop_assert!(f1_score(&pos, &neg, probe) <= best + 1e-12);
        }
    }
}
