use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{json_hash, sha256_hex, ExperimentConfig, RetrievalScope};
use super::prepare::{load_materialized, materialize_all, plan_items, write_materialized, Materialized, PreparedItem, Role, Variant};
use crate::datasets::{load_manifest, make_desk_dataset, stratified_assign, write_manifest, Manifest, Provenance, Split};
use crate::error::{Error, Result};
use crate::eval::{class_metrics, pca_project, sensitivity_report, topk_accuracy, CorpusQueries, MetricsReport, PartialSummary};
use crate::exec::Exec;
use crate::nn::{checkpoint, evaluate, train_from, Example, FeatureVector, Modality, ModelWeights, Network, TrainReport};
use crate::retrieval::{
    build_catalog, calibrate_threshold, f1_score, query_batch, read_catalog, write_catalog, Catalog, CatalogEntry, CatalogMeta,
};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prepare,
    Train,
    Index,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Prepare, Stage::Train, Stage::Index, Stage::Evaluate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Train => "train",
            Stage::Index => "index",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Stages whose outputs this one reads.
    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Prepare => &[],
            Stage::Train => &[Stage::Prepare],
            Stage::Index => &[Stage::Prepare, Stage::Train],
            Stage::Evaluate => &[Stage::Prepare, Stage::Train, Stage::Index],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Written to `stages/<stage>.json` after a stage completes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    /// Hash of the config sections this stage reads.
    pub config_sha256: String,
    /// Hash of `config_sha256` and every upstream output hash.
    pub inputs_sha256: String,
    /// Upstream stage → hash of its output table.
    pub upstream: BTreeMap<String, String>,
    /// Output path relative to the run directory → SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

impl StageReport {
    pub fn outputs_sha256(&self) -> String {
        json_hash(&self.outputs)
    }
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub report: StageReport,
    /// Inputs were unchanged and outputs intact, so nothing ran.
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Refuse to rerun or consume artifacts whose hashes disagree with the
    /// current config or disk contents.
    pub strict: bool,
    /// Rerun even when the stage is up to date.
    pub force: bool,
}

/// Retrieval numbers on held-out queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub scope: RetrievalScope,
    pub catalog_size: usize,
    pub queries: usize,
    pub topk_accuracy: BTreeMap<usize, f64>,
    /// The same queries ranked against every CAD model.
    pub full_catalog_topk: BTreeMap<usize, f64>,
    pub threshold: f64,
    /// `config`, `train_queries`, or `heldout_queries` when no training-split
    /// queries exist.
    pub threshold_source: String,
    pub calibration_f1: f64,
    /// F1 of `nearest distance <= threshold` as a predictor of a correct
    /// top-1 match, over held-out queries.
    pub f1: f64,
    pub mean_positive: f64,
    pub mean_negative: f64,
}

/// Contents of `evaluate/metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    pub branches: String,
    pub checkpoint_sha256: String,
    pub catalog_sha256: String,
    pub config_sha256: String,
    pub classification: MetricsReport,
    pub retrieval: RetrievalSummary,
    pub partial: Vec<PartialSummary>,
}

pub const PREPARE_DIR: &str = "prepare";
pub const ITEMS_FILE: &str = "prepare/items.json";
pub const SPLIT_MANIFEST: &str = "prepare/manifest.csv";
pub const CHECKPOINT_FILE: &str = "train/checkpoint.smck";
pub const TRAIN_REPORT_FILE: &str = "train/train_report.json";
pub const CATALOG_FILE: &str = "index/catalog.bin";
pub const METRICS_FILE: &str = "evaluate/metrics.json";
pub const SENSITIVITY_FILE: &str = "evaluate/sensitivity.json";

pub fn report_path(out: &Path, stage: Stage) -> PathBuf {
    out.join("stages").join(format!("{}.json", stage.name()))
}

pub fn read_report(out: &Path, stage: Stage) -> Result<Option<StageReport>> {
    let p = report_path(out, stage);
    match std::fs::read(&p) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| Error::format("stage report", e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(&p, e)),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn hash_outputs(out: &Path, rels: &[String], exec: Exec) -> Result<BTreeMap<String, String>> {
    let hashes = exec.try_map(rels, |r| file_sha256(&out.join(r)))?;
    Ok(rels.iter().cloned().zip(hashes).collect())
}

fn outputs_intact(out: &Path, report: &StageReport, exec: Exec) -> bool {
    let rels: Vec<String> = report.outputs.keys().cloned().collect();
    hash_outputs(out, &rels, exec).is_ok_and(|h| h == report.outputs)
}

/// Hash of the config sections `stage` reads.
pub fn stage_config_hash(cfg: &ExperimentConfig, stage: Stage) -> String {
    let v = match stage {
        Stage::Prepare => serde_json::json!({
            "seed": cfg.seed,
            "dataset": cfg.dataset,
            "render": cfg.render,
            "sampling": cfg.sampling,
            "queries": cfg.queries,
            "train_fraction": cfg.train.train_fraction,
        }),
        Stage::Train => {
            let mut t = cfg.train.clone();
            // execution strategy never changes results
            t.parallel = false;
            serde_json::json!({ "seed": cfg.seed, "arch": cfg.arch, "train": t })
        }
        Stage::Index => serde_json::json!({}),
        Stage::Evaluate => serde_json::json!({ "retrieval": cfg.retrieval }),
    };
    json_hash(&serde_json::json!({ "stage": stage.name(), "config": v }))
}

fn inputs_hash(config: &str, upstream: &BTreeMap<String, String>) -> String {
    json_hash(&serde_json::json!({ "config": config, "upstream": upstream }))
}

fn exec_of(cfg: &ExperimentConfig) -> Exec {
    cfg.train.exec()
}

/// Runs one stage, or skips it when its inputs and outputs are unchanged.
/// A stale prerequisite (config changed or outputs edited) is rerun first,
/// or reported as [`Error::Stale`] under `strict`.
pub fn run_stage(cfg: &ExperimentConfig, stage: Stage, opts: RunOptions) -> Result<StageOutcome> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let exec = exec_of(cfg);
    let mut upstream = BTreeMap::new();
    for &dep in stage.dependencies() {
        let report = read_report(out, dep)?.ok_or_else(|| Error::Dependency {
            stage: stage.name().into(),
            missing: dep.name().into(),
        })?;
        // upstream reports are consumed in order, so a dep's own deps are
        // already fresh by the time it is checked here
        let fresh = is_fresh(cfg, dep, &report, exec)?;
        let report = if fresh {
            report
        } else if opts.strict {
            return Err(Error::Stale(dep.name().into()));
        } else {
            log::info!("stage {dep} is stale; rerunning");
            run_stage(cfg, dep, RunOptions { force: true, ..opts })?.report
        };
        upstream.insert(dep.name().to_string(), report.outputs_sha256());
    }
    let config_sha256 = stage_config_hash(cfg, stage);
    let inputs_sha256 = inputs_hash(&config_sha256, &upstream);
    if let Some(prev) = read_report(out, stage)? {
        if prev.inputs_sha256 == inputs_sha256 && outputs_intact(out, &prev, exec) {
            if !opts.force {
                log::info!("stage {stage} is up to date");
                return Ok(StageOutcome {
                    report: prev,
                    skipped: true,
                });
            }
        } else if opts.strict {
            return Err(Error::Stale(stage.name().into()));
        }
    }
    log::info!("running stage {stage}");
    let outputs = match stage {
        Stage::Prepare => prepare(cfg, exec)?,
        Stage::Train => train_stage(cfg, exec)?,
        Stage::Index => index(cfg, exec)?,
        Stage::Evaluate => evaluate_stage(cfg, &config_sha256, exec)?,
    };
    let report = StageReport {
        stage,
        config_sha256,
        inputs_sha256,
        upstream,
        outputs: hash_outputs(out, &outputs, exec)?,
    };
    write_json(&report_path(out, stage), &report)?;
    Ok(StageOutcome { report, skipped: false })
}

/// True when the report matches the current config and upstream outputs and
/// its own outputs are intact on disk.
fn is_fresh(cfg: &ExperimentConfig, stage: Stage, report: &StageReport, exec: Exec) -> Result<bool> {
    let out = &cfg.output_dir;
    let mut upstream = BTreeMap::new();
    for &dep in stage.dependencies() {
        match read_report(out, dep)? {
            Some(r) => upstream.insert(dep.name().to_string(), r.outputs_sha256()),
            None => return Ok(false),
        };
    }
    let want = inputs_hash(&stage_config_hash(cfg, stage), &upstream);
    Ok(report.inputs_sha256 == want && outputs_intact(out, report, exec))
}

/// Runs every stage in order.
pub fn run_all(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<StageOutcome>> {
    Stage::ALL.into_iter().map(|s| run_stage(cfg, s, opts)).collect()
}

/// Loads the manifest (or generates the desk corpus) and assigns CAD rows
/// to train/test when any are unassigned. Non-CAD rows are queries and keep
/// their split.
pub fn load_split_manifest(cfg: &ExperimentConfig, out: &Path, exec: Exec) -> Result<Manifest> {
    let m = match &cfg.dataset.manifest {
        Some(p) => load_manifest(p)?,
        None => make_desk_dataset(&cfg.effective_desk(), &out.join("dataset"), exec)?,
    };
    assign_cad_splits(m, cfg.train.train_fraction, cfg.stream("split"))
}

pub fn assign_cad_splits(mut m: Manifest, fraction: f64, seed: u64) -> Result<Manifest> {
    let cad: Vec<usize> = (0..m.rows.len()).filter(|&i| m.rows[i].provenance == Provenance::Cad).collect();
    if cad.iter().all(|&i| m.rows[i].split != Split::Unassigned) {
        return Ok(m);
    }
    let classes: Vec<&str> = cad.iter().map(|&i| m.rows[i].class_label.as_str()).collect();
    let assign = stratified_assign(&classes, fraction, seed)?;
    for (&i, t) in cad.iter().zip(assign) {
        m.rows[i].split = if t { Split::Train } else { Split::Test };
    }
    Ok(m)
}

fn prepare(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<String>> {
    let out = &cfg.output_dir;
    let m = load_split_manifest(cfg, out, exec)?;
    let items = plan_items(&m, cfg);
    let mats = materialize_all(&m, &items, cfg, exec)?;
    let dir = out.join(PREPARE_DIR);
    write_materialized(&dir, &mats, exec)?;
    // the split manifest lives elsewhere, so mesh paths become absolute
    let mut split = m.clone();
    for r in &mut split.rows {
        let p = m.resolve(r);
        r.mesh_path = std::path::absolute(&p).map_err(|e| Error::io(&p, e))?;
    }
    write_manifest(&split, &out.join(SPLIT_MANIFEST))?;
    write_json(&out.join(ITEMS_FILE), &items)?;
    let mut outputs = vec![ITEMS_FILE.to_string(), SPLIT_MANIFEST.to_string()];
    for it in &items {
        for p in [&it.views, &it.points] {
            outputs.push(format!("{PREPARE_DIR}/{}", p.to_string_lossy().replace('\\', "/")));
        }
    }
    Ok(outputs)
}

/// Items and their on-disk data from a completed prepare stage.
pub fn load_prepared(out: &Path, exec: Exec) -> Result<Vec<Materialized>> {
    let items: Vec<PreparedItem> = read_json(&out.join(ITEMS_FILE))?;
    load_materialized(&out.join(PREPARE_DIR), &items, exec)
}

/// Class list of a prepared run: sorted distinct CAD labels.
pub fn catalog_classes(items: &[Materialized]) -> Vec<String> {
    let mut c: Vec<String> = items
        .iter()
        .filter(|m| m.item.role == Role::Catalog)
        .map(|m| m.item.class_label.clone())
        .collect();
    c.sort();
    c.dedup();
    c
}

pub fn to_example(m: &Materialized, classes: &[String]) -> Result<Example> {
    let label = classes
        .iter()
        .position(|c| *c == m.item.class_label)
        .ok_or_else(|| Error::Validation(format!("class `{}` is not in the class list", m.item.class_label)))?;
    Ok(Example {
        id: m.item.item_id.clone(),
        label,
        views: m.views.images.clone(),
        points: ModelWeights::flatten_points(&m.cloud),
    })
}

/// Catalog training examples of one split.
pub fn examples_for(items: &[Materialized], classes: &[String], split: Split) -> Result<Vec<Example>> {
    items
        .iter()
        .filter(|m| m.item.role == Role::Catalog && m.item.split == split)
        .map(|m| to_example(m, classes))
        .collect()
}

fn train_stage(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<String>> {
    let out = &cfg.output_dir;
    let items = load_prepared(out, exec)?;
    let classes = catalog_classes(&items);
    let arch = cfg.resolved_arch(classes.clone());
    let tcfg = cfg.effective_train();
    let tr = examples_for(&items, &classes, Split::Train)?;
    let va = examples_for(&items, &classes, Split::Test)?;
    let init = Network::init(&arch, seeds::derive(tcfg.seed, &[0x1417]))?;
    let (net, report) = train_from(init, &tr, &va, &tcfg)?;
    write_bytes(&out.join(CHECKPOINT_FILE), &checkpoint::encode_checkpoint(&net))?;
    write_json(&out.join(TRAIN_REPORT_FILE), &report)?;
    Ok(vec![CHECKPOINT_FILE.into(), TRAIN_REPORT_FILE.into()])
}

fn modality_of(net: &ModelWeights) -> Modality {
    match net.arch.branches {
        crate::nn::Branches::Joint => Modality::Joint,
        crate::nn::Branches::Image => Modality::Image,
        crate::nn::Branches::Point => Modality::Point,
    }
}

/// Retrieval embedding of one prepared item; `source_id` is the query id
/// for queries and the model id for catalog models.
pub fn embed(net: &ModelWeights, m: &Materialized) -> Result<FeatureVector> {
    let views = ModelWeights::image_view_slices(&m.views);
    let points = ModelWeights::flatten_points(&m.cloud);
    let inf = net.infer(&views, &points)?;
    Ok(FeatureVector {
        values: inf.feature,
        modality: modality_of(net),
        source_id: m.item.query_id.clone().unwrap_or_else(|| m.item.model_id.clone()),
    })
}

pub fn embed_entries(net: &ModelWeights, items: &[&Materialized], exec: Exec) -> Result<Vec<CatalogEntry>> {
    exec.try_map(items, |m| {
        let feature = embed(net, m)?;
        Ok(CatalogEntry {
            model_id: feature.source_id.clone(),
            class_label: m.item.class_label.clone(),
            feature,
            provenance: m.item.provenance,
        })
    })
}

fn index(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<String>> {
    let out = &cfg.output_dir;
    let items = load_prepared(out, exec)?;
    let ck = out.join(CHECKPOINT_FILE);
    let net = checkpoint::load_checkpoint(&ck)?;
    let cad: Vec<&Materialized> = items.iter().filter(|m| m.item.role == Role::Catalog).collect();
    let mut cat = build_catalog(embed_entries(&net, &cad, exec)?)?;
    cat.meta = CatalogMeta {
        checkpoint_path: Some(CHECKPOINT_FILE.into()),
        checkpoint_sha256: Some(file_sha256(&ck)?),
        render: Some(cfg.render.clone()),
        point_count: Some(cfg.sampling.point_count),
        seed: Some(cfg.seed),
    };
    let path = out.join(CATALOG_FILE);
    let dir = path.parent().expect("catalog path has a parent");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_catalog(&cat, &path)?;
    Ok(vec![CATALOG_FILE.into(), format!("{CATALOG_FILE}.json")])
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Queries never seen in training: every real scan, and synthesized
/// queries of test-split models.
fn is_heldout(it: &PreparedItem) -> bool {
    it.role == Role::Query && it.truth.is_some() && (!it.synthesized || it.split == Split::Test)
}

fn is_calibration(it: &PreparedItem) -> bool {
    it.role == Role::Query && it.truth.is_some() && it.synthesized && it.split == Split::Train
}

fn evaluate_stage(cfg: &ExperimentConfig, config_sha256: &str, exec: Exec) -> Result<Vec<String>> {
    let out = &cfg.output_dir;
    let items = load_prepared(out, exec)?;
    let ck = out.join(CHECKPOINT_FILE);
    let net = checkpoint::load_checkpoint(&ck)?;
    let cat_path = out.join(CATALOG_FILE);
    let catalog = read_catalog(&cat_path)?;
    let checkpoint_sha256 = file_sha256(&ck)?;
    if catalog.meta.checkpoint_sha256.as_deref() != Some(checkpoint_sha256.as_str()) {
        return Err(Error::Stale("index".into()));
    }
    let classes = net.arch.classes.clone();

    let test = examples_for(&items, &classes, Split::Test)?;
    let summary = evaluate(&net, &test, exec)?;
    let mut classification = class_metrics(&summary.predictions, &summary.truth, &classes)?;
    classification.dataset = cfg.dataset_name();

    let pick = |f: &dyn Fn(&PreparedItem) -> bool, v: Variant| -> Vec<&Materialized> {
        items.iter().filter(|m| f(&m.item) && m.item.variant == v).collect()
    };
    let split_of: HashMap<&str, Split> = items
        .iter()
        .filter(|m| m.item.role == Role::Catalog)
        .map(|m| (m.item.model_id.as_str(), m.item.split))
        .collect();
    let scoped = |split: Split| -> Result<Catalog> {
        match cfg.retrieval.scope {
            RetrievalScope::All => Ok(catalog.clone()),
            RetrievalScope::Heldout => {
                let keep = catalog
                    .entries()
                    .iter()
                    .filter(|e| split_of.get(e.model_id.as_str()) == Some(&split))
                    .cloned()
                    .collect();
                build_catalog(keep)
            }
        }
    };
    let truth: HashMap<String, String> = items
        .iter()
        .filter(|m| m.item.role == Role::Query)
        .filter_map(|m| Some((m.item.query_id.clone()?, m.item.truth.clone()?)))
        .collect();
    let in_catalog = |cat: &Catalog, es: Vec<CatalogEntry>| -> Vec<CatalogEntry> {
        es.into_iter()
            .filter(|e| truth.get(&e.model_id).is_some_and(|t| cat.get(t).is_some()))
            .collect()
    };
    let eval_cat = scoped(Split::Test)?;
    let held_clean = in_catalog(&eval_cat, embed_entries(&net, &pick(&is_heldout, Variant::Clean), exec)?);
    let held_partial = in_catalog(&eval_cat, embed_entries(&net, &pick(&is_heldout, Variant::Partial), exec)?);
    if held_clean.is_empty() {
        return Err(Error::Validation("no held-out queries with a counterpart in the catalog".into()));
    }

    let ks = &cfg.retrieval.ks;
    let feats: Vec<FeatureVector> = held_clean.iter().map(|e| e.feature.clone()).collect();
    let kmax = |c: &Catalog| ks.iter().copied().max().unwrap_or(1).min(c.len());
    let results = query_batch(&eval_cat, &feats, kmax(&eval_cat), exec)?;
    let topk = topk_accuracy(&results, &truth, ks)?;
    let full_topk = topk_accuracy(&query_batch(&catalog, &feats, kmax(&catalog), exec)?, &truth, ks)?;
    classification.topk_accuracy = topk.clone();

    let name = cfg.dataset_name();
    let one = |cat: Catalog, clean: Vec<CatalogEntry>, occluded: Vec<CatalogEntry>| {
        let mut m = BTreeMap::new();
        m.insert(
            name.clone(),
            CorpusQueries {
                catalog: cat,
                clean,
                occluded,
                truth: truth.clone(),
            },
        );
        m
    };
    let sens = sensitivity_report(&one(eval_cat.clone(), held_clean.clone(), held_partial), exec)?;
    let held = &sens.corpora[0];

    let calib_cat = scoped(Split::Train)?;
    let calib_clean = in_catalog(&calib_cat, embed_entries(&net, &pick(&is_calibration, Variant::Clean), exec)?);
    let (threshold, source, calibration_f1) = match cfg.retrieval.threshold {
        Some(t) => (t, "config", f1_score(&held.positives, &held.negatives, t)),
        None if !calib_clean.is_empty() => {
            let cd = &sensitivity_report(&one(calib_cat, calib_clean, Vec::new()), exec)?.corpora[0];
            let (t, f) = calibrate_threshold(&cd.positives, &cd.negatives)?;
            (t, "train_queries", f)
        }
        None => {
            let (t, f) = calibrate_threshold(&held.positives, &held.negatives)?;
            (t, "heldout_queries", f)
        }
    };
    let retrieval = RetrievalSummary {
        scope: cfg.retrieval.scope,
        catalog_size: eval_cat.len(),
        queries: results.len(),
        topk_accuracy: topk,
        full_catalog_topk: full_topk,
        threshold,
        threshold_source: source.into(),
        calibration_f1,
        f1: f1_score(&held.positives, &held.negatives, threshold),
        mean_positive: mean(&held.positives),
        mean_negative: mean(&held.negatives),
    };

    let report = EvaluationReport {
        dataset: name,
        branches: net.arch.branches.name().into(),
        checkpoint_sha256,
        catalog_sha256: file_sha256(&cat_path)?,
        config_sha256: config_sha256.into(),
        classification,
        retrieval,
        partial: sens.partial_summary.clone(),
    };
    let dir = out.join("evaluate");
    write_json(&out.join(METRICS_FILE), &report)?;
    write_json(&out.join(SENSITIVITY_FILE), &sens)?;
    write_bytes(&dir.join("distances.csv"), sens.distances_csv().as_bytes())?;
    write_bytes(&dir.join("partial.csv"), sens.partial_csv().as_bytes())?;

    let mut pca_in: Vec<CatalogEntry> = catalog.entries().to_vec();
    pca_in.extend(held_clean);
    let fv: Vec<FeatureVector> = pca_in.iter().map(|e| e.feature.clone()).collect();
    let pca = pca_project(&fv, 2)?;
    let labels: Vec<(String, String, String)> = pca_in
        .iter()
        .map(|e| (e.model_id.clone(), e.class_label.clone(), e.provenance.to_string()))
        .collect();
    write_bytes(&dir.join("pca.csv"), pca.to_csv(&labels).as_bytes())?;
    write_json(&dir.join("pca_variance.json"), &pca.explained_variance_ratio)?;

    Ok([
        METRICS_FILE,
        SENSITIVITY_FILE,
        "evaluate/distances.csv",
        "evaluate/partial.csv",
        "evaluate/pca.csv",
        "evaluate/pca_variance.json",
    ]
    .map(String::from)
    .to_vec())
}

pub fn read_evaluation(out: &Path) -> Result<EvaluationReport> {
    read_json(&out.join(METRICS_FILE))
}

pub fn read_train_report(out: &Path) -> Result<TrainReport> {
    read_json(&out.join(TRAIN_REPORT_FILE))
}
