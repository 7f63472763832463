//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails. Criteria 7, 8, 9 and 11 train the desk
//! configuration four times and take several minutes.
//!
//! Criterion 12 runs only when `SHAPEMATCH_MCB_ROOT` and
//! `SHAPEMATCH_TLESS_ROOT` point at local dataset copies.

mod common;

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapematch::datasets::{adapt_mcb, adapt_tless, Provenance};
use shapematch::eval::pca_project;
use shapematch::geometry::{sample_surface_with_faces, PointCloud, TriMesh, Vec3};
use shapematch::nn::{classify_views, encode_points, gradcheck, train_phase, Branches, FeatureVector, Modality, ModelWeights, ParamGroup};
use shapematch::pipeline::{pretrain_then_transfer, read_evaluation, run_all, EvaluationReport, ExperimentConfig, RunOptions, METRICS_FILE};
use shapematch::retrieval::{build_catalog, query, CatalogEntry};

struct Verdict {
    id: &'static str,
    pass: Option<bool>,
    detail: String,
}

fn verdict(id: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict {
        id,
        pass: Some(pass),
        detail,
    }
}

// libtest captures print macros; write to the handle so lines always show
fn report(v: &Verdict) {
    let tag = match v.pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "SKIP",
    };
    let mut out = std::io::stdout();
    writeln!(out, "[acceptance] {tag} {:<3} {}", v.id, v.detail).unwrap();
    out.flush().unwrap();
}

fn c1_sampling_fidelity() -> Verdict {
    let v = |x, y| -> Vec3 { [x, y, 0.0] };
    // areas 1 and 3
    let mesh = TriMesh::new(
        vec![v(0.0, 0.0), v(1.0, 0.0), v(0.0, 2.0), v(2.0, 0.0), v(5.0, 0.0), v(2.0, 2.0)],
        vec![[0, 1, 2], [3, 4, 5]],
        "two-triangles",
        None,
    )
    .unwrap();
    let t = Instant::now();
    let (_, faces) = sample_surface_with_faces(&mesh, 10_000, 17).unwrap();
    let elapsed = t.elapsed();
    let f0 = faces.iter().filter(|&&f| f == 0).count() as f64 / 1e4;
    let f1 = 1.0 - f0;
    let ok = (f0 - 0.25).abs() <= 0.02 && (f1 - 0.75).abs() <= 0.02 && elapsed < Duration::from_secs(1);
    verdict("1", ok, format!("sampling fidelity: freq {f0:.4}/{f1:.4} (0.25/0.75 ± 0.02), {elapsed:.2?} (< 1 s)"))
}

fn c2_permutation_invariance() -> Verdict {
    let cfg = ExperimentConfig::desk();
    let arch = cfg.resolved_arch(vec!["a".into(), "b".into()]);
    let net = ModelWeights::init(&arch, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pc = PointCloud {
        points: (0..2048)
            .map(|_| -> Vec3 { [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)] })
            .collect(),
        source_id: "cloud".into(),
    };
    let reference = encode_points(&pc, &net).unwrap().values;
    let mut equal = 0;
    for _ in 0..100 {
        pc.points.shuffle(&mut rng);
        let f = encode_points(&pc, &net).unwrap().values;
        equal += usize::from(f.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    verdict("2", equal == 100, format!("point-encoder permutation invariance: {equal}/100 bitwise equal"))
}

fn c3_gradient_checks() -> Verdict {
    let t = Instant::now();
    let checks = gradcheck::run_all(7, 20);
    let elapsed = t.elapsed();
    let worst = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let failing: Vec<&str> = checks
        .iter()
        .filter(|c| c.max_rel_error.is_nan() || c.max_rel_error >= 1e-4 || c.probes < 20)
        .map(|c| c.name.as_str())
        .collect();
    verdict(
        "3",
        failing.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "gradient checks: {} layer checks, worst rel err {worst:.2e} (< 1e-4), failing {failing:?}, {elapsed:.2?} (< 30 s)",
            checks.len()
        ),
    )
}

fn c4_two_phase_contract() -> Verdict {
    let t = Instant::now();
    let cfg = common::tiny_config();
    let (arch, ex) = common::tiny_examples(&cfg, 2);
    let tcfg = common::train_cfg(&cfg);
    let bits = |n: &ModelWeights, g| -> Vec<u32> { n.group_tensors(g).iter().flat_map(|t| t.iter().map(|v| v.to_bits())).collect() };
    let init = ModelWeights::init(&arch, 1).unwrap();
    let mut net = init.clone();
    train_phase(&mut net, &ex, &tcfg, 1, 0).unwrap();
    let backbones = [ParamGroup::ImageBackbone, ParamGroup::PointBackbone];
    let frozen = backbones.iter().all(|&g| bits(&net, g) == bits(&init, g));
    train_phase(&mut net, &ex, &tcfg, 2, tcfg.phase1_epochs).unwrap();
    let moved = backbones.iter().all(|&g| bits(&net, g) != bits(&init, g));
    let elapsed = t.elapsed();
    verdict(
        "4",
        frozen && moved && elapsed < Duration::from_secs(120),
        format!("two-phase contract: backbones identical after phase 1 {frozen}, changed after phase 2 {moved}, {elapsed:.2?} (< 2 min)"),
    )
}

fn c5_product_of_views() -> Verdict {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    let uniform = classify_views(&vec![vec![0.5, 0.5]; 4]).unwrap();
    let symmetric = classify_views(&[vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
    let onehot = classify_views(&[vec![0.3, 0.7], vec![1.0, 0.0], vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    let reordered = classify_views(&[vec![0.2, 0.8], vec![0.9, 0.1], vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
    let ok = close(&uniform, &[0.5, 0.5]) && close(&symmetric, &[0.5, 0.5]) && close(&onehot, &[1.0, 0.0]) && close(&onehot, &reordered);
    verdict(
        "5",
        ok,
        format!("product of views: uniform {uniform:?}, symmetric {symmetric:?}, one-hot {onehot:?} (1e-12)"),
    )
}

fn c6_retrieval_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut ties = 0;
    for q in 0..50 {
        let width = rng.random_range(2..6);
        // coarse integer grid so equal distances are common
        let vector = |rng: &mut ChaCha8Rng| -> Vec<f32> { (0..width).map(|_| rng.random_range(0..3) as f32).collect() };
        let entries: Vec<CatalogEntry> = (0..200)
            .map(|i| CatalogEntry {
                model_id: format!("q{q}-m{i}"),
                class_label: "c".into(),
                feature: FeatureVector {
                    values: vector(&mut rng),
                    modality: Modality::Joint,
                    source_id: format!("q{q}-m{i}"),
                },
                provenance: Provenance::Cad,
            })
            .collect();
        let f = FeatureVector {
            values: vector(&mut rng),
            modality: Modality::Joint,
            source_id: format!("query{q}"),
        };
        let mut oracle: Vec<(f64, usize)> = entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let s: f64 = e.feature.values.iter().zip(&f.values).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum();
                (s.sqrt(), i)
            })
            .collect();
        // exhaustive sort on (distance, insertion index)
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ties += oracle.windows(2).filter(|w| w[0].0 == w[1].0).count();
        let cat = build_catalog(entries).unwrap();
        let got = query(&cat, &f, 200).unwrap();
        let same = got.ranked.len() == 200
            && got
                .ranked
                .iter()
                .zip(&oracle)
                .all(|((id, d), (od, oi))| id == &cat.entries()[*oi].model_id && d == od);
        mismatches += usize::from(!same);
    }
    verdict(
        "6",
        mismatches == 0 && ties > 0,
        format!("retrieval oracle: {mismatches}/50 rankings differ from exhaustive sort ({ties} tied neighbours exercised)"),
    )
}

fn desk_run(dir: &Path, branches: Branches) -> (EvaluationReport, Duration) {
    let mut cfg = ExperimentConfig::desk();
    cfg.output_dir = dir.to_path_buf();
    cfg.arch.branches = branches;
    let t = Instant::now();
    run_all(&cfg, RunOptions::default()).unwrap();
    (read_evaluation(dir).unwrap(), t.elapsed())
}

fn top(r: &EvaluationReport, k: usize) -> f64 {
    r.retrieval.topk_accuracy[&k]
}

fn c10_pca() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (n, d, dims) = (60, 8, 3);
    // per-axis scales keep the leading eigenvalues well separated
    let feats: Vec<FeatureVector> = (0..n)
        .map(|i| FeatureVector {
            values: (0..d).map(|j| rng.random_range(-1.0..1.0f32) * (d - j) as f32).collect(),
            modality: Modality::Joint,
            source_id: format!("f{i}"),
        })
        .collect();
    let p = pca_project(&feats, dims).unwrap();
    let x = DMatrix::from_fn(n, d, |i, j| feats[i].values[j] as f64);
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().sum();
    let mut worst: f64 = 0.0;
    for (axis, &k) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(k);
        let oracle = &centred * v;
        let sign = if oracle.dot(&DMatrix::from_fn(n, 1, |i, _| p.coords[i][axis]).column(0)) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            worst = worst.max((p.coords[i][axis] - sign * oracle[i]).abs());
        }
        worst = worst.max((p.explained_variance_ratio[axis] - eig.eigenvalues[k] / total).abs());
    }
    let nonincreasing = p.explained_variance_ratio.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        "10",
        worst <= 1e-6 && nonincreasing,
        format!("PCA vs dense eigendecomposition: max deviation {worst:.2e} (1e-6), ratios nonincreasing {nonincreasing}"),
    )
}

fn c12_transfer() -> Verdict {
    let (Some(mcb), Some(tless)) = (std::env::var_os("SHAPEMATCH_MCB_ROOT"), std::env::var_os("SHAPEMATCH_TLESS_ROOT")) else {
        return Verdict {
            id: "12",
            pass: None,
            detail: "MCB-B to T-LESS transfer: no local datasets (set SHAPEMATCH_MCB_ROOT and SHAPEMATCH_TLESS_ROOT)".into(),
        };
    };
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        output_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let source = adapt_mcb(Path::new(&mcb)).unwrap();
    let target = adapt_tless(Path::new(&tless)).unwrap();
    let (_, r) = pretrain_then_transfer(&source.manifest, &target.manifest, &cfg, "mcb", "tless").unwrap();
    let t = &r.topk_accuracy["mcb"];
    let ok = r.target_queries == 30 && (t[&1] - 85.2).abs() <= 10.0;
    verdict("12", ok, format!("MCB-B to T-LESS transfer: {} queries, top-1/3/5 {:.1}/{:.1}/{:.1} (85.2 ± 10)", r.target_queries, t[&1], t[&3], t[&5]))
}

#[test]
fn acceptance() {
    let mut verdicts = Vec::new();
    let mut record = |v: Verdict| {
        report(&v);
        verdicts.push(v);
    };
    record(c1_sampling_fidelity());
    record(c2_permutation_invariance());
    record(c3_gradient_checks());
    record(c4_two_phase_contract());
    record(c5_product_of_views());
    record(c6_retrieval_oracle());

    let tmp = tempfile::tempdir().unwrap();
    let (joint, joint_time) = desk_run(&tmp.path().join("joint"), Branches::Joint);
    let (image, _) = desk_run(&tmp.path().join("image"), Branches::Image);
    let (point, _) = desk_run(&tmp.path().join("point"), Branches::Point);
    let (t1, t3, t5) = (top(&joint, 1), top(&joint, 3), top(&joint, 5));
    record(verdict(
        "7a",
        t1 >= 80.0 && t1 <= t3 && t3 <= t5 && joint_time < Duration::from_secs(1800),
        format!(
            "desk held-out retrieval: top-1/3/5 {t1:.2}/{t3:.2}/{t5:.2} over {} queries (top-1 >= 80, nondecreasing), {joint_time:.0?} (< 30 min)",
            joint.retrieval.queries
        ),
    ));
    let best_single = top(&image, 1).max(top(&point, 1));
    record(verdict(
        "7b",
        t1 >= best_single - 5.0,
        format!("joint vs single branch: joint {t1:.2}, image {:.2}, point {:.2} (joint >= best - 5)", top(&image, 1), top(&point, 1)),
    ));
    let partial = &joint.partial[0];
    record(verdict(
        "8",
        partial.mean_occluded > partial.mean_clean,
        format!(
            "partial-scan sensitivity: occluded mean nearest distance {:.4} vs clean {:.4} (strictly greater)",
            partial.mean_occluded, partial.mean_clean
        ),
    ));
    record(verdict(
        "9",
        joint.retrieval.f1 >= 0.8,
        format!(
            "match-threshold separation: F1 {:.3} at threshold {:.4} calibrated on {} (>= 0.8)",
            joint.retrieval.f1, joint.retrieval.threshold, joint.retrieval.threshold_source
        ),
    ));
    record(c10_pca());
    desk_run(&tmp.path().join("joint-again"), Branches::Joint);
    let a = std::fs::read(tmp.path().join("joint").join(METRICS_FILE)).unwrap();
    let b = std::fs::read(tmp.path().join("joint-again").join(METRICS_FILE)).unwrap();
    record(verdict("11", a == b, format!("determinism: repeated desk runs give byte-identical metrics ({} bytes)", a.len())));
    record(c12_transfer());

    let failed: Vec<&str> = verdicts.iter().filter(|v| v.pass == Some(false)).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
