use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shapematch::nn::BlockSpec;
use shapematch::pipeline::ExperimentConfig;

fn tiny_config(dir: &Path) -> PathBuf {
    let mut cfg = ExperimentConfig::desk();
    cfg.seed = 11;
    cfg.output_dir = dir.join("run");
    cfg.dataset.desk.classes = vec!["washer".into(), "gear".into()];
    cfg.dataset.desk.per_class = 5;
    cfg.render.image_side = 16;
    cfg.render.view_count = 2;
    cfg.sampling.point_count = 128;
    cfg.arch.stem_channels = 4;
    cfg.arch.blocks = vec![BlockSpec {
        expansion: 1,
        channels: 4,
        repeats: 1,
        stride: 2,
    }];
    cfg.arch.image_dim = 8;
    cfg.arch.point_layers = vec![8, 8];
    cfg.train.phase1_epochs = 1;
    cfg.train.phase2_epochs = 1;
    let path = dir.join("tiny.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn shapematch(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapematch"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("SHAPEMATCH_OUT")
        .env_remove("SHAPEMATCH_CONFIG")
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_lines(s: &str) -> Vec<serde_json::Value> {
    s.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_shapematch")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_before_index_reports_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = shapematch(&cfg, &["eval"]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "dependency");
    assert!(err["message"].as_str().unwrap().contains("`evaluate` requires"));
}

#[test]
fn sample_with_occlusion_writes_fewer_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let data = dir.path().join("data");
    ok(&shapematch(&cfg, &["gen-dataset", "--per-class", "1", "--classes", "washer", "--out", data.to_str().unwrap()]));
    let obj = std::fs::read_dir(data.join("meshes/washer")).unwrap().next().unwrap().unwrap().path();
    let out = dir.path().join("w.csv");
    let line = ok(&shapematch(
        &cfg,
        &["sample", "--input", obj.to_str().unwrap(), "-n", "200", "--occlude", "0.25", "--out", out.to_str().unwrap()],
    ));
    assert_eq!(json_lines(&line)[0]["points"], 150);
    let cloud = shapematch::geometry::read_point_cloud(&out).unwrap();
    assert_eq!(cloud.len(), 150);

    let views = dir.path().join("views");
    ok(&shapematch(&cfg, &["render", "--input", obj.to_str().unwrap(), "--png", "--out", views.to_str().unwrap()]));
    let pngs = std::fs::read_dir(&views)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, 2);
}

#[test]
fn end_to_end_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("run");

    let first = json_lines(&ok(&shapematch(&cfg, &["train"])));
    assert_eq!(first.len(), 2);
    assert!(first.iter().all(|l| l["skipped"] == false));
    let again = json_lines(&ok(&shapematch(&cfg, &["train"])));
    assert!(again.iter().all(|l| l["skipped"] == true));

    ok(&shapematch(&cfg, &["index"]));
    let eval = ok(&shapematch(&cfg, &["eval"]));
    let lines = json_lines(&eval);
    let metrics = lines.last().unwrap();
    assert_eq!(metrics["retrieval"]["topk_accuracy"].as_object().unwrap().len(), 3);

    // a catalog mesh regenerated from the same seed retrieves itself at distance ~0
    let data = dir.path().join("data");
    ok(&shapematch(&cfg, &["gen-dataset", "--out", data.to_str().unwrap()]));
    let catalog = run.join("index/catalog.bin");
    let cat = shapematch::retrieval::read_catalog(&catalog).unwrap();
    let target = &cat.entries()[0];
    let obj = data.join("meshes").join(&target.class_label).join(format!("{}.obj", target.model_id));
    let hits = json_lines(&ok(&shapematch(
        &cfg,
        &["query", "--catalog", catalog.to_str().unwrap(), "--input", obj.to_str().unwrap(), "-k", "3"],
    )));
    assert_eq!(hits.len(), 3);
    assert_eq!(hits[0]["model_id"], target.model_id.as_str());
    assert!(hits[0]["distance"].as_f64().unwrap() < 1e-6);

    let pca = dir.path().join("pca.csv");
    ok(&shapematch(&cfg, &["pca", "--catalog", catalog.to_str().unwrap(), "--out", pca.to_str().unwrap()]));
    assert!(std::fs::read_to_string(&pca).unwrap().starts_with("id,class,provenance,x,y\n"));
    assert!(dir.path().join("pca.variance.json").exists());

    let dist = dir.path().join("d.csv");
    ok(&shapematch(
        &cfg,
        &["distances", "--catalog", catalog.to_str().unwrap(), "--inputs", obj.to_str().unwrap(), "--out", dist.to_str().unwrap()],
    ));
    let rows = std::fs::read_to_string(&dist).unwrap().lines().count();
    assert_eq!(rows, 1 + cat.len());

    ok(&shapematch(&cfg, &["plot", "--input", dist.to_str().unwrap(), "--kind", "hist", "--group", "query_id"]));
    ok(&shapematch(&cfg, &["plot", "--input", pca.to_str().unwrap(), "--kind", "scatter", "--group", "class"]));
    assert!(dir.path().join("d.png").exists() && dir.path().join("pca.png").exists());

    let bad = shapematch(&cfg, &["plot", "--input", pca.to_str().unwrap(), "--kind", "hist", "--column", "nope"]);
    assert_eq!(bad.status.code(), Some(1));
}
