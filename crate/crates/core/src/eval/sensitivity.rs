use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::retrieval::{pairwise_distances, Catalog, CatalogEntry};

/// Queries embedded in one corpus's feature space.
#[derive(Debug, Clone)]
pub struct CorpusQueries {
    pub catalog: Catalog,
    pub clean: Vec<CatalogEntry>,
    /// Occluded versions of (some of) the clean queries, same `model_id`.
    pub occluded: Vec<CatalogEntry>,
    /// query id → correct catalog model id.
    pub truth: HashMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDistances {
    pub tag: String,
    /// Every query × catalog distance.
    pub pairwise: Vec<f64>,
    /// Per clean query, distance to its nearest catalog entry.
    pub nearest: Vec<f64>,
    /// Nearest-match distance of queries whose top-1 model is correct.
    pub positives: Vec<f64>,
    /// Nearest-match distance of queries whose top-1 model is wrong.
    pub negatives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialRow {
    pub tag: String,
    pub query_id: String,
    pub clean: f64,
    pub occluded: f64,
    /// `occluded / clean`; absent when the clean distance is 0.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSummary {
    pub tag: String,
    pub queries: usize,
    pub mean_clean: f64,
    pub mean_occluded: f64,
    pub mean_ratio: Option<f64>,
    pub zero_baseline_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub corpora: Vec<CorpusDistances>,
    pub partial: Vec<PartialRow>,
    pub partial_summary: Vec<PartialSummary>,
}

fn nearest(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn sensitivity_report(corpora: &BTreeMap<String, CorpusQueries>, exec: Exec) -> Result<SensitivityReport> {
    let mut out = SensitivityReport {
        corpora: Vec::new(),
        partial: Vec::new(),
        partial_summary: Vec::new(),
    };
    for (tag, cq) in corpora {
        let cat = &cq.catalog;
        let clean = pairwise_distances(cat, &cq.clean, exec)?;
        let n = cat.len();
        let rows: Vec<&[f64]> = clean.distances.chunks(n.max(1)).collect();
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (q, row) in cq.clean.iter().zip(&rows) {
            let Some(want) = cq.truth.get(&q.model_id) else {
                continue;
            };
            if !clean.catalog_ids.iter().any(|id| id == want) {
                return Err(Error::Validation(format!("truth `{want}` is not in catalog `{tag}`")));
            }
            // first minimum, matching the tie order of `query`
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &d)| if d < acc.1 { (i, d) } else { acc });
            if clean.catalog_ids[best.0] == *want {
                positives.push(best.1);
            } else {
                negatives.push(best.1);
            }
        }
        out.corpora.push(CorpusDistances {
            tag: tag.clone(),
            pairwise: clean.distances.clone(),
            nearest: rows.iter().map(|r| nearest(r)).collect(),
            positives,
            negatives,
        });

        if cq.occluded.is_empty() {
            continue;
        }
        let occ = pairwise_distances(cat, &cq.occluded, exec)?;
        let clean_nearest: HashMap<&str, f64> = cq
            .clean
            .iter()
            .zip(&rows)
            .map(|(q, r)| (q.model_id.as_str(), nearest(r)))
            .collect();
        let mut rows_out = Vec::new();
        for (q, row) in cq.occluded.iter().zip(occ.distances.chunks(n.max(1))) {
            let c = *clean_nearest
                .get(q.model_id.as_str())
                .ok_or_else(|| Error::Validation(format!("occluded query `{}` has no clean twin", q.model_id)))?;
            let o = nearest(row);
            rows_out.push(PartialRow {
                tag: tag.clone(),
                query_id: q.model_id.clone(),
                clean: c,
                occluded: o,
                ratio: (c > 0.0).then(|| o / c),
            });
        }
        let k = rows_out.len() as f64;
        let ratios: Vec<f64> = rows_out.iter().filter_map(|r| r.ratio).collect();
        out.partial_summary.push(PartialSummary {
            tag: tag.clone(),
            queries: rows_out.len(),
            mean_clean: rows_out.iter().map(|r| r.clean).sum::<f64>() / k,
            mean_occluded: rows_out.iter().map(|r| r.occluded).sum::<f64>() / k,
            mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            zero_baseline_excluded: rows_out.len() - ratios.len(),
        });
        out.partial.extend(rows_out);
    }
    Ok(out)
}

impl SensitivityReport {
    /// Long format `tag,kind,distance` with kinds pairwise, nearest,
    /// positive and negative.
    pub fn distances_csv(&self) -> String {
        let mut s = String::from("tag,kind,distance\n");
        for c in &self.corpora {
            for (kind, vals) in [
                ("pairwise", &c.pairwise),
                ("nearest", &c.nearest),
                ("positive", &c.positives),
                ("negative", &c.negatives),
            ] {
                for v in vals {
                    s.push_str(&format!("{},{kind},{v}\n", c.tag));
                }
            }
        }
        s
    }

    pub fn partial_csv(&self) -> String {
        let mut s = String::from("tag,query_id,clean,occluded,ratio\n");
        for r in &self.partial {
            let ratio = r.ratio.map_or(String::new(), |v| v.to_string());
            s.push_str(&format!("{},{},{},{},{ratio}\n", r.tag, r.query_id, r.clean, r.occluded));
        }
        s
    }
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into
/// the end bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let mut h = vec![0usize; bins.max(1)];
    let width = (hi - lo) / h.len() as f64;
    for &v in values {
        let b = if width > 0.0 { ((v - lo) / width).floor() } else { 0.0 };
        let b = (b.max(0.0) as usize).min(h.len() - 1);
        h[b] += 1;
    }
    h
}
