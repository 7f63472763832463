use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{zeros_like, BlockCache, Conv3x3, ConvCache, Dense, InvertedResidual, Params, TensorSpec};
use super::ops::{relu, relu6, relu6_backward, relu_backward, softmax};
use super::Scalar;
use crate::error::{Error, Result};

/// Which encoder branches feed the classification head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branches {
    Joint,
    Image,
    Point,
}

impl Branches {
    pub fn has_image(self) -> bool {
        matches!(self, Branches::Joint | Branches::Image)
    }
    pub fn has_point(self) -> bool {
        matches!(self, Branches::Joint | Branches::Point)
    }
    pub fn name(self) -> &'static str {
        match self {
            Branches::Joint => "joint",
            Branches::Image => "image",
            Branches::Point => "point",
        }
    }
}

/// One row of the MobileNetV2 bottleneck table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub expansion: usize,
    pub channels: usize,
    pub repeats: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub branches: Branches,
    pub classes: Vec<String>,
    pub image_side: usize,
    pub view_count: usize,
    pub stem_channels: usize,
    pub blocks: Vec<BlockSpec>,
    /// Width of the per-view image embedding.
    pub image_dim: usize,
    pub point_count: usize,
    /// Shared per-point layer widths; the last one is the point embedding width.
    pub point_layers: Vec<usize>,
}

impl Default for ArchConfig {
    /// Half-width MobileNetV2 layout at 224 px and the PointNet layer stack
    /// at 2,048 points.
    fn default() -> Self {
        let b = |expansion, channels, repeats, stride| BlockSpec {
            expansion,
            channels,
            repeats,
            stride,
        };
        ArchConfig {
            branches: Branches::Joint,
            classes: Vec::new(),
            image_side: 224,
            view_count: 4,
            stem_channels: 16,
            blocks: vec![
                b(1, 8, 1, 1),
                b(6, 12, 2, 2),
                b(6, 16, 3, 2),
                b(6, 32, 4, 2),
                b(6, 48, 3, 1),
                b(6, 80, 3, 2),
                b(6, 160, 1, 1),
            ],
            image_dim: 256,
            point_count: 2048,
            point_layers: vec![64, 64, 128, 256],
        }
    }
}

impl ArchConfig {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn point_dim(&self) -> usize {
        self.point_layers.last().copied().unwrap_or(0)
    }

    /// Width of the retrieval embedding this architecture produces.
    pub fn feature_dim(&self) -> usize {
        match self.branches {
            Branches::Joint => self.image_dim + self.point_dim(),
            Branches::Image => self.image_dim,
            Branches::Point => self.point_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.classes.len() < 2 {
            return bad("architecture needs at least two classes");
        }
        if self.branches.has_image() && (self.image_side < 8 || self.view_count == 0 || self.image_dim == 0) {
            return bad("image branch needs image_side >= 8, view_count >= 1 and image_dim >= 1");
        }
        if self.branches.has_point() && (self.point_count == 0 || self.point_layers.is_empty()) {
            return bad("point branch needs point_count >= 1 and at least one layer");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Point,
    Joint,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modality::Image => "image",
            Modality::Point => "point",
            Modality::Joint => "joint",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub modality: Modality,
    pub source_id: String,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBackbone<S> {
    pub stem: Conv3x3<S>,
    pub blocks: Vec<InvertedResidual<S>>,
}

pub struct ImageCache<S> {
    stem: ConvCache<S>,
    stem_pre: Vec<S>,
    blocks: Vec<BlockCache<S>>,
    h: usize,
    w: usize,
    gap: Vec<S>,
    head_pre: Vec<S>,
}

impl<S: Scalar> ImageBackbone<S> {
    fn init(rng: &mut ChaCha8Rng, arch: &ArchConfig) -> Self {
        let stem = Conv3x3::init(rng, 1, arch.stem_channels, 2);
        let mut cin = arch.stem_channels;
        let mut blocks = Vec::new();
        for spec in &arch.blocks {
            for r in 0..spec.repeats.max(1) {
                let stride = if r == 0 { spec.stride } else { 1 };
                blocks.push(InvertedResidual::init(rng, cin, spec.channels, spec.expansion, stride));
                cin = spec.channels;
            }
        }
        ImageBackbone { stem, blocks }
    }

    pub fn out_channels(&self) -> usize {
        self.blocks.last().map_or(self.stem.cout, |b| b.out_channels())
    }

    /// Pooled backbone activations for one grayscale view.
    #[allow(clippy::type_complexity)]
    fn forward(&self, pixels: &[S], side: usize) -> (Vec<S>, ConvCache<S>, Vec<S>, Vec<BlockCache<S>>, usize, usize) {
        let two = S::of(2.0);
        let half = S::of(0.5);
        let x: Vec<S> = pixels.iter().map(|&v| (v - half) * two).collect();
        let (stem_pre, stem_cache) = self.stem.forward(&x, side, side);
        let (mut h, mut w) = self.stem.out_dims(side, side);
        let mut a = relu6(&stem_pre);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&a, h, w);
            (h, w) = b.out_dims(h, w);
            caches.push(c);
            a = y;
        }
        let ch = self.out_channels();
        let mut gap = vec![S::zero(); ch];
        for px in a.chunks_exact(ch) {
            for (g, &v) in gap.iter_mut().zip(px) {
                *g += v;
            }
        }
        let inv = S::of(1.0 / (h * w) as f64);
        gap.iter_mut().for_each(|g| *g *= inv);
        (gap, stem_cache, stem_pre, caches, h, w)
    }

    fn backward(&self, cache: &ImageCache<S>, dgap: &[S], grad: &mut ImageBackbone<S>) {
        let ch = self.out_channels();
        let inv = S::of(1.0 / (cache.h * cache.w) as f64);
        let mut d: Vec<S> = (0..cache.h * cache.w)
            .flat_map(|_| dgap.iter().map(move |&g| g * inv))
            .collect();
        debug_assert_eq!(d.len(), cache.h * cache.w * ch);
        for (i, b) in self.blocks.iter().enumerate().rev() {
            d = b
                .backward(&cache.blocks[i], &d, &mut grad.blocks[i], true)
                .expect("dx requested");
        }
        relu6_backward(&cache.stem_pre, &mut d);
        self.stem.backward(&cache.stem, &d, &mut grad.stem, false);
    }
}

impl<S> Params<S> for ImageBackbone<S> {
    fn tensors(&self) -> Vec<&Vec<S>> {
        let mut t = self.stem.tensors();
        for b in &self.blocks {
            t.extend(b.tensors());
        }
        t
    }
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut t = self.stem.tensors_mut();
        for b in &mut self.blocks {
            t.extend(b.tensors_mut());
        }
        t
    }
    fn specs(&self, prefix: &str) -> Vec<TensorSpec> {
        let mut t = self.stem.specs(&format!("{prefix}.stem"));
        for (i, b) in self.blocks.iter().enumerate() {
            t.extend(b.specs(&format!("{prefix}.block{i}")));
        }
        t
    }
}

/// Shared per-point layers (ReLU after each) followed by a max over points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBackbone<S> {
    pub layers: Vec<Dense<S>>,
}

pub struct PointCache<S> {
    inputs: Vec<Vec<S>>,
    pres: Vec<Vec<S>>,
    argmax: Vec<usize>,
    rows: usize,
}

impl<S: Scalar> PointBackbone<S> {
    fn init(rng: &mut ChaCha8Rng, arch: &ArchConfig) -> Self {
        let mut inp = 3;
        let layers = arch
            .point_layers
            .iter()
            .map(|&out| {
                let l = Dense::init(rng, inp, out, 1.0);
                inp = out;
                l
            })
            .collect();
        PointBackbone { layers }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(3, |l| l.out)
    }

    fn forward(&self, points: &[S], rows: usize) -> (Vec<S>, PointCache<S>) {
        let mut x = points.to_vec();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pres = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let pre = l.forward(&x, rows);
            let act = relu(&pre);
            inputs.push(std::mem::replace(&mut x, act));
            pres.push(pre);
        }
        let d = self.out_dim();
        let mut best = vec![S::neg_infinity(); d];
        let mut argmax = vec![0usize; d];
        for (r, row) in x.chunks_exact(d).enumerate() {
            for ((b, a), &v) in best.iter_mut().zip(argmax.iter_mut()).zip(row) {
                if v > *b {
                    *b = v;
                    *a = r;
                }
            }
        }
        (
            best,
            PointCache {
                inputs,
                pres,
                argmax,
                rows,
            },
        )
    }

    fn backward(&self, cache: &PointCache<S>, dpool: &[S], grad: &mut PointBackbone<S>) {
        let d = self.out_dim();
        let mut dy = vec![S::zero(); cache.rows * d];
        for (c, (&r, &g)) in cache.argmax.iter().zip(dpool).enumerate() {
            dy[r * d + c] += g;
        }
        for (i, l) in self.layers.iter().enumerate().rev() {
            relu_backward(&cache.pres[i], &mut dy);
            match l.backward(&cache.inputs[i], cache.rows, &dy, &mut grad.layers[i], i > 0) {
                Some(dx) => dy = dx,
                None => break,
            }
        }
    }
}

impl<S> Params<S> for PointBackbone<S> {
    fn tensors(&self) -> Vec<&Vec<S>> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
    fn specs(&self, prefix: &str) -> Vec<TensorSpec> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.specs(&format!("{prefix}.layer{i}")))
            .collect()
    }
}

/// Parameter groups that training can freeze or update independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    ImageBackbone,
    ImageHead,
    PointBackbone,
    JointHead,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] = [
        ParamGroup::ImageBackbone,
        ParamGroup::ImageHead,
        ParamGroup::PointBackbone,
        ParamGroup::JointHead,
    ];

    pub fn is_head(self) -> bool {
        matches!(self, ParamGroup::ImageHead | ParamGroup::JointHead)
    }
}

/// Which parameters receive gradients in a backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradScope {
    HeadsOnly,
    All,
}

/// The joint classifier: image branch (backbone + embedding head), point
/// branch, and one linear classification head over their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    pub arch: ArchConfig,
    pub image_backbone: Option<ImageBackbone<S>>,
    pub image_head: Option<Dense<S>>,
    pub point_backbone: Option<PointBackbone<S>>,
    pub joint_head: Dense<S>,
}

pub type ModelWeights = Network<f32>;

/// Output of a full forward pass.
#[derive(Debug, Clone)]
pub struct Inference<S> {
    /// Retrieval embedding (image part first for joint networks).
    pub feature: Vec<S>,
    pub probs: Vec<f64>,
    pub label: usize,
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    // strict comparison keeps the lowest index on ties
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

struct ViewPass<S> {
    cache: ImageCache<S>,
    feature: Vec<S>,
}

impl<S: Scalar> Network<S> {
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (image_backbone, image_head) = if arch.branches.has_image() {
            let bb = ImageBackbone::init(&mut rng, arch);
            let head = Dense::init(&mut rng, bb.out_channels(), arch.image_dim, 1.0);
            (Some(bb), Some(head))
        } else {
            (None, None)
        };
        let point_backbone = arch.branches.has_point().then(|| PointBackbone::init(&mut rng, arch));
        let head_in = match arch.branches {
            Branches::Image => arch.image_dim,
            _ => arch.feature_dim(),
        };
        let joint_head = Dense::init(&mut rng, head_in, arch.class_count(), 0.5);
        Ok(Network {
            arch: arch.clone(),
            image_backbone,
            image_head,
            point_backbone,
            joint_head,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Network {
            arch: self.arch.clone(),
            image_backbone: self.image_backbone.as_ref().map(zeros_like),
            image_head: self.image_head.as_ref().map(zeros_like),
            point_backbone: self.point_backbone.as_ref().map(zeros_like),
            joint_head: zeros_like(&self.joint_head),
        }
    }

    pub fn group_tensors(&self, group: ParamGroup) -> Vec<&Vec<S>> {
        match group {
            ParamGroup::ImageBackbone => self.image_backbone.as_ref().map(|p| p.tensors()),
            ParamGroup::ImageHead => self.image_head.as_ref().map(|p| p.tensors()),
            ParamGroup::PointBackbone => self.point_backbone.as_ref().map(|p| p.tensors()),
            ParamGroup::JointHead => Some(self.joint_head.tensors()),
        }
        .unwrap_or_default()
    }

    pub fn group_tensors_mut(&mut self, group: ParamGroup) -> Vec<&mut Vec<S>> {
        match group {
            ParamGroup::ImageBackbone => self.image_backbone.as_mut().map(|p| p.tensors_mut()),
            ParamGroup::ImageHead => self.image_head.as_mut().map(|p| p.tensors_mut()),
            ParamGroup::PointBackbone => self.point_backbone.as_mut().map(|p| p.tensors_mut()),
            ParamGroup::JointHead => Some(self.joint_head.tensors_mut()),
        }
        .unwrap_or_default()
    }

    pub fn all_tensors(&self) -> Vec<&Vec<S>> {
        ParamGroup::ALL.iter().flat_map(|&g| self.group_tensors(g)).collect()
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        let Network {
            image_backbone,
            image_head,
            point_backbone,
            joint_head,
            ..
        } = self;
        let mut t = Vec::new();
        if let Some(p) = image_backbone {
            t.extend(p.tensors_mut());
        }
        if let Some(p) = image_head {
            t.extend(p.tensors_mut());
        }
        if let Some(p) = point_backbone {
            t.extend(p.tensors_mut());
        }
        t.extend(joint_head.tensors_mut());
        t
    }

    /// Names and shapes in the same order as [`Network::all_tensors`].
    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let mut t = Vec::new();
        if let Some(p) = &self.image_backbone {
            t.extend(p.specs("image_backbone"));
        }
        if let Some(p) = &self.image_head {
            t.extend(p.specs("image_head"));
        }
        if let Some(p) = &self.point_backbone {
            t.extend(p.specs("point_backbone"));
        }
        t.extend(self.joint_head.specs("joint_head"));
        t
    }

    pub fn parameter_count(&self) -> usize {
        self.all_tensors().iter().map(|t| t.len()).sum()
    }

    fn check_views(&self, views: &[&[S]]) -> Result<()> {
        let side = self.arch.image_side;
        if views.is_empty() {
            return Err(Error::Shape("need at least one view".into()));
        }
        if let Some(i) = views.iter().position(|v| v.len() != side * side) {
            return Err(Error::Shape(format!(
                "view {i} has {} pixels, expected {side}x{side} grayscale",
                views[i].len()
            )));
        }
        Ok(())
    }

    fn check_points(&self, points: &[S]) -> Result<()> {
        let n = self.arch.point_count;
        if points.len() != n * 3 {
            return Err(Error::Shape(format!(
                "point branch expects {n} points, got {}",
                points.len() / 3
            )));
        }
        Ok(())
    }

    fn view_pass(&self, pixels: &[S]) -> ViewPass<S> {
        let bb = self.image_backbone.as_ref().expect("image branch present");
        let head = self.image_head.as_ref().expect("image branch present");
        let (gap, stem, stem_pre, blocks, h, w) = bb.forward(pixels, self.arch.image_side);
        let head_pre = head.forward(&gap, 1);
        let feature = relu(&head_pre);
        ViewPass {
            cache: ImageCache {
                stem,
                stem_pre,
                blocks,
                h,
                w,
                gap,
                head_pre,
            },
            feature,
        }
    }

    fn view_backward(&self, pass: &ViewPass<S>, dfeat: &[S], scope: GradScope, grad: &mut Network<S>) {
        let head = self.image_head.as_ref().expect("image branch present");
        let mut d = dfeat.to_vec();
        relu_backward(&pass.cache.head_pre, &mut d);
        let dgap = head.backward(
            &pass.cache.gap,
            1,
            &d,
            grad.image_head.as_mut().expect("grad mirrors"),
            scope == GradScope::All,
        );
        if let Some(dgap) = dgap {
            self.image_backbone.as_ref().unwrap().backward(
                &pass.cache,
                &dgap,
                grad.image_backbone.as_mut().expect("grad mirrors"),
            );
        }
    }

    /// Mean of the per-view embeddings.
    pub fn image_embedding(&self, views: &[&[S]]) -> Result<Vec<S>> {
        if !self.arch.branches.has_image() {
            return Err(Error::Modality {
                expected: "network with an image branch".into(),
                actual: self.arch.branches.name().into(),
            });
        }
        self.check_views(views)?;
        let feats: Vec<Vec<S>> = views.iter().map(|v| self.view_pass(v).feature).collect();
        Ok(mean_rows(&feats))
    }

    pub fn point_embedding(&self, points: &[S]) -> Result<Vec<S>> {
        let bb = self.point_backbone.as_ref().ok_or_else(|| Error::Modality {
            expected: "network with a point branch".into(),
            actual: self.arch.branches.name().into(),
        })?;
        self.check_points(points)?;
        Ok(bb.forward(points, self.arch.point_count).0)
    }

    /// Full forward pass: embedding, class probabilities and label.
    pub fn infer(&self, views: &[&[S]], points: &[S]) -> Result<Inference<S>> {
        let b = self.arch.branches;
        if b.has_image() {
            self.check_views(views)?;
        }
        if b.has_point() {
            self.check_points(points)?;
        }
        let (feature, probs) = match b {
            Branches::Image => {
                let feats: Vec<Vec<S>> = views.iter().map(|v| self.view_pass(v).feature).collect();
                let per_view: Vec<Vec<f64>> =
                    feats.iter().map(|f| softmax(&self.joint_head.forward(f, 1))).collect();
                (mean_rows(&feats), classify_views(&per_view)?)
            }
            _ => {
                let mut feature = if b.has_image() { self.image_embedding(views)? } else { Vec::new() };
                if b.has_point() {
                    feature.extend(self.point_embedding(points)?);
                }
                let probs = softmax(&self.joint_head.forward(&feature, 1));
                (feature, probs)
            }
        };
        Ok(Inference {
            label: argmax(&probs),
            feature,
            probs,
        })
    }

    /// Cross-entropy loss for one example; parameter gradients in `scope`
    /// are accumulated into `grad`. Returns (loss, predicted label).
    pub fn loss_and_grad(
        &self,
        views: &[&[S]],
        points: &[S],
        label: usize,
        weight: f64,
        scope: GradScope,
        grad: &mut Network<S>,
    ) -> Result<(f64, usize)> {
        let b = self.arch.branches;
        if b.has_image() {
            self.check_views(views)?;
        }
        if b.has_point() {
            self.check_points(points)?;
        }
        if label >= self.arch.class_count() {
            return Err(Error::Validation(format!("label {label} out of range")));
        }
        let passes: Vec<ViewPass<S>> = if b.has_image() {
            views.iter().map(|v| self.view_pass(v)).collect()
        } else {
            Vec::new()
        };
        let point_pass = match &self.point_backbone {
            Some(bb) => Some(bb.forward(points, self.arch.point_count)),
            None => None,
        };

        let ce_grad = |probs: &[f64], scale: f64| -> Vec<S> {
            probs
                .iter()
                .enumerate()
                .map(|(k, &p)| S::of(weight * scale * (p - if k == label { 1.0 } else { 0.0 })))
                .collect()
        };

        match b {
            Branches::Image => {
                let k = passes.len() as f64;
                let mut loss = 0.0;
                let mut per_view = Vec::with_capacity(passes.len());
                for pass in &passes {
                    let probs = softmax(&self.joint_head.forward(&pass.feature, 1));
                    loss -= weight * probs[label].max(1e-300).ln() / k;
                    let dlogits = ce_grad(&probs, 1.0 / k);
                    let dfeat = self
                        .joint_head
                        .backward(&pass.feature, 1, &dlogits, &mut grad.joint_head, true)
                        .expect("dx requested");
                    self.view_backward(pass, &dfeat, scope, grad);
                    per_view.push(probs);
                }
                Ok((loss, argmax(&classify_views(&per_view)?)))
            }
            _ => {
                let mut feature = if b.has_image() {
                    mean_rows(&passes.iter().map(|p| p.feature.clone()).collect::<Vec<_>>())
                } else {
                    Vec::new()
                };
                if let Some((pf, _)) = &point_pass {
                    feature.extend_from_slice(pf);
                }
                let probs = softmax(&self.joint_head.forward(&feature, 1));
                let loss = -weight * probs[label].max(1e-300).ln();
                let dlogits = ce_grad(&probs, 1.0);
                let dfeat = self
                    .joint_head
                    .backward(&feature, 1, &dlogits, &mut grad.joint_head, true)
                    .expect("dx requested");
                let split = if b.has_image() { self.arch.image_dim } else { 0 };
                if b.has_image() {
                    let k = S::of(1.0 / passes.len() as f64);
                    let dview: Vec<S> = dfeat[..split].iter().map(|&g| g * k).collect();
                    for pass in &passes {
                        self.view_backward(pass, &dview, scope, grad);
                    }
                }
                if let (Some((_, cache)), GradScope::All) = (&point_pass, scope) {
                    self.point_backbone.as_ref().unwrap().backward(
                        cache,
                        &dfeat[split..],
                        grad.point_backbone.as_mut().expect("grad mirrors"),
                    );
                }
                Ok((loss, argmax(&probs)))
            }
        }
    }
}

fn mean_rows<S: Scalar>(rows: &[Vec<S>]) -> Vec<S> {
    let mut out = vec![S::zero(); rows[0].len()];
    for r in rows {
        for (o, &v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let inv = S::of(1.0 / rows.len() as f64);
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

/// Product-of-views class aggregation: multiplies the per-view class
/// distributions elementwise and renormalizes, switching to log space when
/// the direct product underflows.
pub fn classify_views(per_view_probs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = per_view_probs
        .first()
        .ok_or_else(|| Error::Validation("no views to aggregate".into()))?;
    let m = first.len();
    for (i, p) in per_view_probs.iter().enumerate() {
        let sum: f64 = p.iter().sum();
        if p.len() != m || m == 0 || p.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "view {i} is not a probability vector over {m} classes"
            )));
        }
    }
    let mut prod = vec![1.0f64; m];
    for p in per_view_probs {
        for (o, &v) in prod.iter_mut().zip(p) {
            *o *= v;
        }
    }
    let total: f64 = prod.iter().sum();
    if total.is_normal() {
        return Ok(prod.into_iter().map(|v| v / total).collect());
    }
    let logs: Vec<f64> = (0..m)
        .map(|k| per_view_probs.iter().map(|p| p[k].ln()).sum())
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Validation(
            "views jointly assign zero probability to every class".into(),
        ));
    }
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

impl ModelWeights {
    pub fn image_view_slices(views: &crate::render::ViewSet) -> Vec<&[f32]> {
        views.images.iter().map(|im| im.data.as_slice()).collect()
    }

    pub fn flatten_points(pc: &crate::geometry::PointCloud) -> Vec<f32> {
        pc.points.iter().flat_map(|p| p.iter().map(|&v| v as f32)).collect()
    }
}

/// Point-branch embedding of a normalized cloud.
pub fn encode_points(pc: &crate::geometry::PointCloud, w: &ModelWeights) -> Result<FeatureVector> {
    let values = w.point_embedding(&ModelWeights::flatten_points(pc))?;
    Ok(FeatureVector {
        values,
        modality: Modality::Point,
        source_id: pc.source_id.clone(),
    })
}

/// Image-branch embedding: per-view embeddings averaged across views.
pub fn encode_views(vs: &crate::render::ViewSet, w: &ModelWeights) -> Result<FeatureVector> {
    if let Some(i) = vs.images.iter().position(|im| im.channels != 1) {
        return Err(Error::Shape(format!("view {i} is not single-channel")));
    }
    let values = w.image_embedding(&ModelWeights::image_view_slices(vs))?;
    Ok(FeatureVector {
        values,
        modality: Modality::Image,
        source_id: vs.model_id.clone(),
    })
}

/// Concatenation with the image embedding first.
pub fn joint_feature(image: &FeatureVector, point: &FeatureVector) -> Result<FeatureVector> {
    for (fv, want) in [(image, Modality::Image), (point, Modality::Point)] {
        if fv.modality != want {
            return Err(Error::Modality {
                expected: want.to_string(),
                actual: fv.modality.to_string(),
            });
        }
    }
    let mut values = image.values.clone();
    values.extend_from_slice(&point.values);
    Ok(FeatureVector {
        values,
        modality: Modality::Joint,
        source_id: image.source_id.clone(),
    })
}

/// Runs the full classifier. Returns the argmax label (lowest index on
/// ties), the class distribution, and the retrieval embedding.
pub fn classify_joint(
    vs: &crate::render::ViewSet,
    pc: &crate::geometry::PointCloud,
    w: &ModelWeights,
) -> Result<(usize, Vec<f64>, FeatureVector)> {
    let views = ModelWeights::image_view_slices(vs);
    let points = ModelWeights::flatten_points(pc);
    let out = w.infer(&views, &points)?;
    let modality = match w.arch.branches {
        Branches::Joint => Modality::Joint,
        Branches::Image => Modality::Image,
        Branches::Point => Modality::Point,
    };
    Ok((
        out.label,
        out.probs,
        FeatureVector {
            values: out.feature,
            modality,
            source_id: vs.model_id.clone(),
        },
    ))
}

impl<S: Scalar> Params<S> for Network<S> {
    fn tensors(&self) -> Vec<&Vec<S>> {
        self.all_tensors()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        self.all_tensors_mut()
    }
    fn specs(&self, _prefix: &str) -> Vec<TensorSpec> {
        self.tensor_specs()
    }
}
