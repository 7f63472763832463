#![allow(dead_code)]

use shapematch::geometry::{gen_procedural, normalize_unit_sphere, sample_surface, ShapeParams};
use shapematch::nn::{ArchConfig, BlockSpec, Example, ModelWeights, TrainConfig};
use shapematch::pipeline::ExperimentConfig;
use shapematch::render::{render_views, AugmentParams};

/// A few-second configuration: 16 px, 2 views, 128 points, one narrow block.
pub fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.render.image_side = 16;
    cfg.render.view_count = 2;
    cfg.sampling.point_count = 128;
    cfg.arch.stem_channels = 4;
    cfg.arch.blocks = vec![BlockSpec {
        expansion: 2,
        channels: 8,
        repeats: 1,
        stride: 2,
    }];
    cfg.arch.image_dim = 16;
    cfg.arch.point_layers = vec![16, 16];
    cfg.train.phase1_epochs = 3;
    cfg.train.phase2_epochs = 200;
    cfg.train.batch_size = 64;
    cfg.train.phase1_lr = 0.05;
    cfg.train.phase2_lr = 0.005;
    cfg.train.augment = AugmentParams::none();
    cfg
}

pub const TINY_CLASSES: [&str; 3] = ["washer", "gear", "bracket"];

/// `per_class` procedural models of each of [`TINY_CLASSES`], rendered and sampled.
pub fn tiny_examples(cfg: &ExperimentConfig, per_class: usize) -> (ArchConfig, Vec<Example>) {
    let arch = cfg.resolved_arch(TINY_CLASSES.iter().map(|s| s.to_string()).collect());
    let mut out = Vec::new();
    for (label, class) in TINY_CLASSES.iter().enumerate() {
        for i in 0..per_class {
            let seed = (label * 100 + i) as u64;
            let mesh = gen_procedural(class, &ShapeParams::default(), seed).unwrap().normalized();
            let views = render_views(&mesh, &cfg.render, 9).unwrap();
            let pc = normalize_unit_sphere(&sample_surface(&mesh, cfg.sampling.point_count, seed).unwrap());
            out.push(Example {
                id: mesh.model_id.clone(),
                label,
                views: views.images,
                points: ModelWeights::flatten_points(&pc),
            });
        }
    }
    (arch, out)
}

pub fn train_cfg(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        seed: 3,
        ..cfg.train.clone()
    }
}
