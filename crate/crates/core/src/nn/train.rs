use serde::{Deserialize, Serialize};

use super::network::{GradScope, ModelWeights, Network, ParamGroup};
use super::ArchConfig;
use crate::datasets::stratified_assign;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::render::{augment, AugmentParams, Image};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Epochs with only the image embedding head and the classifier trainable.
    pub phase1_epochs: usize,
    /// Epochs with every parameter trainable.
    pub phase2_epochs: usize,
    pub batch_size: usize,
    pub phase1_lr: f64,
    pub phase2_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip per batch.
    pub grad_clip: Option<f64>,
    /// Weight the loss by inverse class frequency.
    pub class_weighting: bool,
    pub augment: AugmentParams,
    pub train_fraction: f64,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            phase1_epochs: 20,
            phase2_epochs: 40,
            batch_size: 16,
            phase1_lr: 0.01,
            phase2_lr: 0.001,
            momentum: 0.9,
            weight_decay: 0.0,
            grad_clip: Some(5.0),
            class_weighting: false,
            augment: AugmentParams::default(),
            train_fraction: 0.8,
            seed: 0,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.phase1_epochs == 0 || self.phase2_epochs == 0 {
            return bad("both training phases need at least one epoch".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.phase1_lr > 0.0 && self.phase2_lr > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning rates must be positive and momentum in [0, 1)".into());
        }
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// One labeled training item: rendered views plus a flattened normalized
/// point cloud (`x0 y0 z0 x1 ...`). Either part may be empty when the
/// architecture lacks that branch.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub label: usize,
    pub views: Vec<Image>,
    pub points: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub phase: u8,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub ids: Vec<String>,
    pub truth: Vec<usize>,
    pub predictions: Vec<usize>,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub train_ids: Vec<String>,
    pub validation: Option<ValidationSummary>,
}

/// Splits `examples` per class by `cfg.train_fraction`, initializes a network
/// from `cfg.seed`, and runs both training phases.
pub fn train(examples: &[Example], arch: &ArchConfig, cfg: &TrainConfig) -> Result<(ModelWeights, TrainReport)> {
    cfg.validate()?;
    check_classes(examples, arch)?;
    let names: Vec<&str> = examples.iter().map(|e| arch.classes[e.label].as_str()).collect();
    let assign = stratified_assign(&names, cfg.train_fraction, cfg.seed)?;
    let (tr, va): (Vec<_>, Vec<_>) = examples.iter().zip(&assign).partition(|(_, &t)| t);
    let tr: Vec<Example> = tr.into_iter().map(|(e, _)| e.clone()).collect();
    let va: Vec<Example> = va.into_iter().map(|(e, _)| e.clone()).collect();
    let init = Network::init(arch, seeds::derive(cfg.seed, &[0x1417]))?;
    train_from(init, &tr, &va, cfg)
}

/// Two-phase training starting from given weights (fresh or imported).
pub fn train_from(
    mut net: ModelWeights,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
) -> Result<(ModelWeights, TrainReport)> {
    cfg.validate()?;
    let mut epochs = train_phase(&mut net, train_set, cfg, 1, 0)?;
    epochs.extend(train_phase(&mut net, train_set, cfg, 2, epochs.len())?);
    let validation = if val_set.is_empty() {
        None
    } else {
        Some(evaluate(&net, val_set, cfg.exec())?)
    };
    let report = TrainReport {
        epochs,
        train_ids: train_set.iter().map(|e| e.id.clone()).collect(),
        validation,
    };
    Ok((net, report))
}

/// Runs one phase in place: phase 1 updates only the heads at `phase1_lr`,
/// phase 2 everything at `phase2_lr`. `done` is the number of epochs already
/// run, which keeps epoch numbering and shuffling seeds continuous.
pub fn train_phase(
    net: &mut ModelWeights,
    train_set: &[Example],
    cfg: &TrainConfig,
    phase: u8,
    done: usize,
) -> Result<Vec<EpochStats>> {
    check_classes(train_set, &net.arch)?;
    let (count, lr, scope) = match phase {
        1 => (cfg.phase1_epochs, cfg.phase1_lr, GradScope::HeadsOnly),
        2 => (cfg.phase2_epochs, cfg.phase2_lr, GradScope::All),
        _ => return Err(Error::Config(format!("training phase must be 1 or 2, got {phase}"))),
    };
    let exec = cfg.exec();
    let weights = class_weights(train_set, net.arch.class_count(), cfg.class_weighting);
    let mut epochs = Vec::new();
    let mut velocity = net.zeros_like();
    for epoch in done + 1..=done + count {
        let order = epoch_order(train_set.len(), seeds::derive(cfg.seed, &[0xe90c, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let per_sample: Vec<Result<(Network<f32>, f64, usize)>> = exec.map(batch, |&i| {
                let ex = &train_set[i];
                let views = augmented_views(ex, &cfg.augment, cfg.seed, epoch, i);
                let slices: Vec<&[f32]> = views.iter().map(|v| v.data.as_slice()).collect();
                let mut g = net.zeros_like();
                let (loss, pred) = net.loss_and_grad(&slices, &ex.points, ex.label, weights[ex.label], scope, &mut g)?;
                Ok((g, loss, pred))
            });
            let mut grad: Option<Network<f32>> = None;
            for (item, &i) in per_sample.into_iter().zip(batch) {
                let (g, loss, pred) = item?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch });
                }
                loss_sum += loss;
                correct += usize::from(pred == train_set[i].label);
                match &mut grad {
                    None => grad = Some(g),
                    Some(acc) => add_into(acc, &g),
                }
            }
            let mut grad = grad.expect("nonempty batch");
            sgd_step(net, &mut grad, &mut velocity, batch.len(), lr, scope, cfg);
            if net.all_tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
                return Err(Error::Divergence { epoch });
            }
        }
        let n = train_set.len().max(1) as f64;
        let stats = EpochStats {
            epoch,
            phase,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
        };
        log::debug!("epoch {epoch} phase {phase} loss {:.5} acc {:.3}", stats.loss, stats.accuracy);
        epochs.push(stats);
    }
    Ok(epochs)
}

/// Classifies every example without augmentation.
pub fn evaluate(net: &ModelWeights, examples: &[Example], exec: Exec) -> Result<ValidationSummary> {
    let outs = exec.try_map(examples, |ex| {
        let slices: Vec<&[f32]> = ex.views.iter().map(|v| v.data.as_slice()).collect();
        net.infer(&slices, &ex.points)
    })?;
    let n = examples.len().max(1) as f64;
    let predictions: Vec<usize> = outs.iter().map(|o| o.label).collect();
    let truth: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let loss = outs
        .iter()
        .zip(&truth)
        .map(|(o, &t)| -o.probs[t].max(1e-300).ln())
        .sum::<f64>()
        / n;
    let correct = predictions.iter().zip(&truth).filter(|(p, t)| p == t).count();
    Ok(ValidationSummary {
        ids: examples.iter().map(|e| e.id.clone()).collect(),
        truth,
        predictions,
        loss,
        accuracy: correct as f64 / n,
    })
}

fn check_classes(examples: &[Example], arch: &ArchConfig) -> Result<()> {
    let m = arch.class_count();
    if let Some(e) = examples.iter().find(|e| e.label >= m) {
        return Err(Error::Validation(format!("example {} has label {} of {m} classes", e.id, e.label)));
    }
    let mut seen = vec![false; m];
    examples.iter().for_each(|e| seen[e.label] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::DegenerateDataset("training needs examples from at least two classes".into()));
    }
    Ok(())
}

fn class_weights(examples: &[Example], m: usize, enabled: bool) -> Vec<f64> {
    if !enabled {
        return vec![1.0; m];
    }
    let mut counts = vec![0usize; m];
    examples.iter().for_each(|e| counts[e.label] += 1);
    let present = counts.iter().filter(|&&c| c > 0).count() as f64;
    let n = examples.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (present * c as f64) })
        .collect()
}

fn epoch_order(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    idx
}

fn augmented_views(ex: &Example, params: &AugmentParams, seed: u64, epoch: usize, sample: usize) -> Vec<Image> {
    if *params == AugmentParams::none() {
        return ex.views.clone();
    }
    ex.views
        .iter()
        .enumerate()
        .map(|(v, img)| augment(img, params, seeds::derive(seed, &[0xa06, epoch as u64, sample as u64, v as u64])))
        .collect()
}

fn add_into(acc: &mut Network<f32>, g: &Network<f32>) {
    for (a, b) in acc.all_tensors_mut().into_iter().zip(g.all_tensors()) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

fn scope_groups(scope: GradScope) -> Vec<ParamGroup> {
    ParamGroup::ALL
        .into_iter()
        .filter(|g| scope == GradScope::All || g.is_head())
        .collect()
}

fn sgd_step(
    net: &mut Network<f32>,
    grad: &mut Network<f32>,
    velocity: &mut Network<f32>,
    batch: usize,
    lr: f64,
    scope: GradScope,
    cfg: &TrainConfig,
) {
    let groups = scope_groups(scope);
    let inv = 1.0 / batch as f64;
    let mut norm2 = 0.0f64;
    for &g in &groups {
        for t in grad.group_tensors_mut(g) {
            for v in t.iter_mut() {
                *v = (*v as f64 * inv) as f32;
                norm2 += (*v as f64).powi(2);
            }
        }
    }
    let clip = match cfg.grad_clip {
        Some(c) if norm2.sqrt() > c => (c / norm2.sqrt()) as f32,
        _ => 1.0,
    };
    let lr = lr as f32;
    let mu = cfg.momentum as f32;
    let wd = cfg.weight_decay as f32;
    for &g in &groups {
        let params = net.group_tensors_mut(g);
        let grads = grad.group_tensors(g);
        let vels = velocity.group_tensors_mut(g);
        for ((p, gr), vel) in params.into_iter().zip(grads).zip(vels) {
            for ((w, &d), v) in p.iter_mut().zip(gr).zip(vel.iter_mut()) {
                *v = mu * *v + d * clip + wd * *w;
                *w -= lr * *v;
            }
        }
    }
}
