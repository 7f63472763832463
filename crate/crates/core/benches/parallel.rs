//! Sequential against rayon execution for the batch-heavy paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use shapematch::datasets::Provenance;
use shapematch::geometry::{gen_procedural, normalize_unit_sphere, sample_surface, ShapeParams, TriMesh, GENERATOR_CLASSES};
use shapematch::nn::{encode_views, FeatureVector, Modality, ModelWeights};
use shapematch::pipeline::ExperimentConfig;
use shapematch::render::render_views;
use shapematch::retrieval::{build_catalog, pairwise_distances, CatalogEntry};
use shapematch::Exec;

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn meshes(n: usize) -> Vec<TriMesh> {
    (0..n)
        .map(|i| gen_procedural(GENERATOR_CLASSES[i % GENERATOR_CLASSES.len()], &ShapeParams::default(), i as u64).unwrap())
        .collect()
}

fn bench_render(c: &mut Criterion) {
    let cfg = ExperimentConfig::desk();
    let ms = meshes(8);
    let mut g = c.benchmark_group("render_views");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(&ms, |m| render_views(m, &cfg.render, 1).unwrap()))
        });
    }
    g.finish();
}

fn bench_sample(c: &mut Criterion) {
    let ms = meshes(16);
    let mut g = c.benchmark_group("sample_surface");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(&ms, |m| normalize_unit_sphere(&sample_surface(m, 2048, 3).unwrap())))
        });
    }
    g.finish();
}

fn bench_embed(c: &mut Criterion) {
    let cfg = ExperimentConfig::desk();
    let arch = cfg.resolved_arch(GENERATOR_CLASSES.iter().map(|s| s.to_string()).collect());
    let net = ModelWeights::init(&arch, 5).unwrap();
    let views: Vec<_> = meshes(8).iter().map(|m| render_views(m, &cfg.render, 1).unwrap()).collect();
    let mut g = c.benchmark_group("encode_views");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(&views, |v| encode_views(v, &net).unwrap()))
        });
    }
    g.finish();
}

fn bench_distances(c: &mut Criterion) {
    let entry = |i: usize| {
        let values = (0..512).map(|j| ((i * 31 + j * 17) % 97) as f32 / 97.0).collect();
        CatalogEntry {
            model_id: format!("m{i}"),
            class_label: "c".into(),
            feature: FeatureVector {
                values,
                modality: Modality::Joint,
                source_id: format!("m{i}"),
            },
            provenance: Provenance::Cad,
        }
    };
    let cat = build_catalog((0..2000).map(entry).collect()).unwrap();
    let queries: Vec<_> = (2000..2064).map(entry).collect();
    let mut g = c.benchmark_group("pairwise_distances");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pairwise_distances(&cat, &queries, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_render, bench_sample, bench_embed, bench_distances);
criterion_main!(benches);
