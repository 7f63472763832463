mod common;

use std::path::Path;

use shapematch::datasets::{make_desk_dataset, DeskConfig};
use shapematch::pipeline::{
    file_sha256, pretrain_then_transfer, read_evaluation, run_all, run_stage, ExperimentConfig, RunOptions, Stage,
    CHECKPOINT_FILE,
};
use shapematch::{Error, Exec};

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = common::tiny_config();
    cfg.output_dir = dir.to_path_buf();
    cfg.dataset.desk.classes = common::TINY_CLASSES.iter().map(|s| s.to_string()).collect();
    cfg.dataset.desk.per_class = 5;
    cfg.train.phase1_epochs = 1;
    cfg.train.phase2_epochs = 2;
    cfg
}

fn skipped(cfg: &ExperimentConfig) -> Vec<bool> {
    run_all(cfg, RunOptions::default()).unwrap().iter().map(|o| o.skipped).collect()
}

#[test]
fn stages_refuse_to_run_before_their_dependencies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    match run_stage(&cfg, Stage::Evaluate, RunOptions::default()) {
        Err(Error::Dependency { stage, .. }) => assert_eq!(stage, "evaluate"),
        other => panic!("expected a dependency error, got {other:?}"),
    }
    run_stage(&cfg, Stage::Prepare, RunOptions::default()).unwrap();
    assert!(matches!(run_stage(&cfg, Stage::Index, RunOptions::default()), Err(Error::Dependency { .. })));
}

#[test]
fn reruns_skip_and_config_edits_rerun_only_readers() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    assert_eq!(skipped(&cfg), [false; 4]);
    assert_eq!(skipped(&cfg), [true; 4]);

    let eval = read_evaluation(dir.path()).unwrap();
    assert_eq!(eval.checkpoint_sha256, file_sha256(&dir.path().join(CHECKPOINT_FILE)).unwrap());

    cfg.retrieval.ks = vec![1, 2];
    assert_eq!(skipped(&cfg), [true, true, true, false]);
    assert_eq!(read_evaluation(dir.path()).unwrap().retrieval.topk_accuracy.len(), 2);

    // strict refuses to rebuild a stale upstream; the default mode rebuilds it
    cfg.train.phase2_epochs = 3;
    assert!(matches!(
        run_stage(&cfg, Stage::Index, RunOptions { strict: true, force: false }),
        Err(Error::Stale(s)) if s == "train"
    ));
    let index = run_stage(&cfg, Stage::Index, RunOptions::default()).unwrap();
    assert!(!index.skipped);
    assert_eq!(skipped(&cfg), [true, true, true, false]);
}

#[test]
fn damaged_outputs_are_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run_all(&cfg, RunOptions::default()).unwrap();
    let ck = dir.path().join(CHECKPOINT_FILE);
    let before = std::fs::read(&ck).unwrap();
    std::fs::write(&ck, b"garbage").unwrap();
    assert!(matches!(
        run_stage(&cfg, Stage::Train, RunOptions { strict: true, force: false }),
        Err(Error::Stale(_))
    ));
    assert!(!run_stage(&cfg, Stage::Train, RunOptions::default()).unwrap().skipped);
    assert_eq!(std::fs::read(&ck).unwrap(), before);
}

#[test]
fn transfer_embeds_unseen_classes_and_rejects_shared_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&dir.path().join("run"));
    let corpus = |classes: &[&str], name: &str| {
        let desk = DeskConfig {
            classes: classes.iter().map(|s| s.to_string()).collect(),
            per_class: 4,
            seed: 1,
            ..Default::default()
        };
        make_desk_dataset(&desk, &dir.path().join(name), Exec::Sequential).unwrap()
    };
    let source = corpus(&["washer", "nut", "pipe", "elbow"], "src");
    let target = corpus(&["flange", "gear", "sphere-cap", "bracket"], "dst");

    let (net, report) = pretrain_then_transfer(&source, &target, &cfg, "src", "dst").unwrap();
    assert_eq!(net.arch.classes, ["bracket", "flange", "gear", "sphere-cap"]);
    // 3 of 4 models per class land in the source train split
    assert_eq!(report.source_models_used, 12);
    assert_eq!(report.target_catalog, 16);
    assert_eq!(report.target_queries, 16);
    let top = &report.topk_accuracy["src"];
    assert!(top[&1] <= top[&3] && top[&3] <= top[&5]);

    match pretrain_then_transfer(&source, &source, &cfg, "src", "src") {
        Err(Error::Contamination(msg)) => assert!(msg.contains("washer-000")),
        other => panic!("expected contamination, got {:?}", other.map(|r| r.1.target_queries)),
    }
}
