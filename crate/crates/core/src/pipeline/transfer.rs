use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::prepare::{materialize_all, plan_items, Materialized, Role, Variant};
use super::stages::{assign_cad_splits, catalog_classes, embed_entries, examples_for};
use crate::datasets::{Manifest, Split};
use crate::error::{Error, Result};
use crate::eval::{sensitivity_report, topk_accuracy, CorpusQueries, SensitivityReport};
use crate::nn::{train_from, Example, FeatureVector, ModelWeights, Network};
use crate::retrieval::{build_catalog, query_batch};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub source_models_used: usize,
    pub target_catalog: usize,
    pub target_queries: usize,
    /// Tag → k → percent, one entry per feature extractor.
    pub topk_accuracy: BTreeMap<String, BTreeMap<usize, f64>>,
    pub sensitivity: SensitivityReport,
}

fn contamination(source: &Manifest, target: &Manifest) -> Result<()> {
    let s: BTreeSet<&str> = source.ids().into_iter().collect();
    let shared: Vec<&str> = target.ids().into_iter().filter(|id| s.contains(id)).collect();
    if shared.is_empty() {
        return Ok(());
    }
    let mut list = shared.iter().take(5).copied().collect::<Vec<_>>().join(", ");
    if shared.len() > 5 {
        list.push_str(&format!(" and {} more", shared.len() - 5));
    }
    Err(Error::Contamination(list))
}

/// Keeps the backbones and image head of `net` and gives it a freshly
/// initialized classification head over `classes`.
pub(crate) fn reinit_head(net: &ModelWeights, classes: Vec<String>, seed: u64) -> Result<ModelWeights> {
    let arch = crate::nn::ArchConfig {
        classes,
        ..net.arch.clone()
    };
    let mut fresh = Network::init(&arch, seed)?;
    fresh.image_backbone = net.image_backbone.clone();
    fresh.image_head = net.image_head.clone();
    fresh.point_backbone = net.point_backbone.clone();
    Ok(fresh)
}

fn train_on(examples: &[Example], classes: Vec<String>, cfg: &ExperimentConfig, stream: &str) -> Result<ModelWeights> {
    let tcfg = crate::nn::TrainConfig {
        seed: cfg.stream(stream),
        ..cfg.train.clone()
    };
    let arch = cfg.resolved_arch(classes);
    let init = Network::init(&arch, seeds::derive(tcfg.seed, &[0x1417]))?;
    Ok(train_from(init, examples, &[], &tcfg)?.0)
}

fn corpus(net: &ModelWeights, target: &[Materialized], cfg: &ExperimentConfig) -> Result<(CorpusQueries, BTreeMap<usize, f64>)> {
    let exec = cfg.train.exec();
    let cad: Vec<&Materialized> = target.iter().filter(|m| m.item.role == Role::Catalog).collect();
    let q = |v: Variant| -> Vec<&Materialized> {
        target
            .iter()
            .filter(|m| m.item.role == Role::Query && m.item.variant == v && m.item.truth.is_some())
            .collect()
    };
    let catalog = build_catalog(embed_entries(net, &cad, exec)?)?;
    let clean = embed_entries(net, &q(Variant::Clean), exec)?;
    let occluded = embed_entries(net, &q(Variant::Partial), exec)?;
    let truth: HashMap<String, String> = target
        .iter()
        .filter_map(|m| Some((m.item.query_id.clone()?, m.item.truth.clone()?)))
        .collect();
    let feats: Vec<FeatureVector> = clean.iter().map(|e| e.feature.clone()).collect();
    let kmax = cfg.retrieval.ks.iter().copied().max().unwrap_or(1).min(catalog.len());
    let topk = topk_accuracy(&query_batch(&catalog, &feats, kmax, exec)?, &truth, &cfg.retrieval.ks)?;
    Ok((
        CorpusQueries {
            catalog,
            clean,
            occluded,
            truth,
        },
        topk,
    ))
}

/// Pre-trains on `source` and extracts target features with the backbones
/// unchanged (only the classification head is re-initialized for the
/// target classes). With `transfer.target_baseline`, a network trained on
/// the target CAD rows is evaluated alongside under the tag `<target>`.
pub fn pretrain_then_transfer(
    source: &Manifest,
    target: &Manifest,
    cfg: &ExperimentConfig,
    source_tag: &str,
    target_tag: &str,
) -> Result<(ModelWeights, TransferReport)> {
    cfg.validate()?;
    contamination(source, target)?;
    let exec = cfg.train.exec();
    let source = assign_cad_splits(source.clone(), cfg.train.train_fraction, cfg.stream("split"))?;
    let src_items: Vec<_> = plan_items(&source, cfg)
        .into_iter()
        .filter(|i| i.role == Role::Catalog && (cfg.transfer.use_full_source || i.split == Split::Train))
        .collect();
    let src = materialize_all(&source, &src_items, cfg, exec)?;
    let src_classes = catalog_classes(&src);
    let mut src_examples = examples_for(&src, &src_classes, Split::Train)?;
    if cfg.transfer.use_full_source {
        src_examples.extend(examples_for(&src, &src_classes, Split::Test)?);
        src_examples.extend(examples_for(&src, &src_classes, Split::Unassigned)?);
    }
    let pretrained = train_on(&src_examples, src_classes, cfg, "transfer-source")?;

    let tgt_items = plan_items(target, cfg);
    let tgt = materialize_all(target, &tgt_items, cfg, exec)?;
    let tgt_classes = catalog_classes(&tgt);
    let net = reinit_head(&pretrained, tgt_classes.clone(), cfg.stream("transfer-head"))?;

    let mut corpora = BTreeMap::new();
    let mut topk = BTreeMap::new();
    let (cq, t) = corpus(&net, &tgt, cfg)?;
    corpora.insert(source_tag.to_string(), cq);
    topk.insert(source_tag.to_string(), t);
    if cfg.transfer.target_baseline {
        let ex: Vec<Example> = tgt
            .iter()
            .filter(|m| m.item.role == Role::Catalog)
            .map(|m| super::stages::to_example(m, &tgt_classes))
            .collect::<Result<_>>()?;
        let base = train_on(&ex, tgt_classes, cfg, "transfer-baseline")?;
        let (cq, t) = corpus(&base, &tgt, cfg)?;
        corpora.insert(target_tag.to_string(), cq);
        topk.insert(target_tag.to_string(), t);
    }
    let first = &corpora[source_tag];
    let report = TransferReport {
        source_models_used: src_examples.len(),
        target_catalog: first.catalog.len(),
        target_queries: first.clean.len(),
        topk_accuracy: topk,
        sensitivity: sensitivity_report(&corpora, exec)?,
    };
    Ok((net, report))
}
