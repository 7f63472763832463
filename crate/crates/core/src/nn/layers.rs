//! Trainable layer types with explicit forward caches and analytic
//! backward passes. Feature maps are `height × width × channels`, channels
//! fastest.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ops::{affine, affine_input_grad, affine_param_grad, relu6, relu6_backward};
use super::Scalar;

/// A named parameter tensor: (name, shape).
pub type TensorSpec = (String, Vec<usize>);

/// Uniform access to parameter tensors in a fixed order.
pub trait Params<S> {
    fn tensors(&self) -> Vec<&Vec<S>>;
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>>;
    fn specs(&self, prefix: &str) -> Vec<TensorSpec>;
}

pub(crate) fn he_init<S: Scalar, R: Rng>(rng: &mut R, n: usize, fan_in: usize, gain: f64) -> Vec<S> {
    let std = gain * (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| S::of(normal.sample(rng))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub inp: usize,
    pub out: usize,
    /// `inp × out`, row-major.
    pub w: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn init<R: Rng>(rng: &mut R, inp: usize, out: usize, gain: f64) -> Self {
        Dense {
            inp,
            out,
            w: he_init(rng, inp * out, inp, gain),
            b: vec![S::zero(); out],
        }
    }

    pub fn forward(&self, x: &[S], rows: usize) -> Vec<S> {
        affine(x, rows, self.inp, &self.w, &self.b, self.out)
    }

    /// Accumulates parameter gradients into `grad` and returns `dx` when asked.
    pub fn backward(&self, x: &[S], rows: usize, dy: &[S], grad: &mut Dense<S>, want_dx: bool) -> Option<Vec<S>> {
        affine_param_grad(x, rows, self.inp, dy, self.out, &mut grad.w, &mut grad.b);
        want_dx.then(|| affine_input_grad(dy, rows, self.out, &self.w, self.inp))
    }
}

impl<S> Params<S> for Dense<S> {
    fn tensors(&self) -> Vec<&Vec<S>> {
        vec![&self.w, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        vec![&mut self.w, &mut self.b]
    }
    fn specs(&self, prefix: &str) -> Vec<TensorSpec> {
        vec![
            (format!("{prefix}.weight"), vec![self.inp, self.out]),
            (format!("{prefix}.bias"), vec![self.out]),
        ]
    }
}

#[inline]
fn out_side(side: usize, stride: usize) -> usize {
    (side - 1) / stride + 1
}

/// Dense 3×3 convolution, padding 1. Used for the stem.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3<S> {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    /// `(ky·3 + kx)·cin + ci` rows × `cout` columns.
    pub w: Vec<S>,
    pub b: Vec<S>,
}

pub struct ConvCache<S> {
    cols: Vec<S>,
    h: usize,
    w: usize,
}

impl<S: Scalar> Conv3x3<S> {
    pub fn init<R: Rng>(rng: &mut R, cin: usize, cout: usize, stride: usize) -> Self {
        Conv3x3 {
            cin,
            cout,
            stride,
            w: he_init(rng, 9 * cin * cout, 9 * cin, 1.0),
            b: vec![S::zero(); cout],
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (out_side(h, self.stride), out_side(w, self.stride))
    }

    fn im2col(&self, x: &[S], h: usize, w: usize) -> Vec<S> {
        let (ho, wo) = self.out_dims(h, w);
        let k = 9 * self.cin;
        let mut cols = vec![S::zero(); ho * wo * k];
        for oy in 0..ho {
            for ox in 0..wo {
                let row = &mut cols[(oy * wo + ox) * k..(oy * wo + ox + 1) * k];
                for ky in 0..3 {
                    let iy = (oy * self.stride + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * self.stride + kx) as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let src = (iy as usize * w + ix as usize) * self.cin;
                        let dst = (ky * 3 + kx) * self.cin;
                        row[dst..dst + self.cin].copy_from_slice(&x[src..src + self.cin]);
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&self, x: &[S], h: usize, w: usize) -> (Vec<S>, ConvCache<S>) {
        let (ho, wo) = self.out_dims(h, w);
        let cols = self.im2col(x, h, w);
        let y = affine(&cols, ho * wo, 9 * self.cin, &self.w, &self.b, self.cout);
        (y, ConvCache { cols, h, w })
    }

    pub fn backward(&self, cache: &ConvCache<S>, dy: &[S], grad: &mut Conv3x3<S>, want_dx: bool) -> Option<Vec<S>> {
        let (h, w) = (cache.h, cache.w);
        let (ho, wo) = self.out_dims(h, w);
        let k = 9 * self.cin;
        affine_param_grad(&cache.cols, ho * wo, k, dy, self.cout, &mut grad.w, &mut grad.b);
        if !want_dx {
            return None;
        }
        let dcols = affine_input_grad(dy, ho * wo, self.cout, &self.w, k);
        let mut dx = vec![S::zero(); h * w * self.cin];
        for oy in 0..ho {
            for ox in 0..wo {
                let row = &dcols[(oy * wo + ox) * k..(oy * wo + ox + 1) * k];
                for ky in 0..3 {
                    let iy = (oy * self.stride + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * self.stride + kx) as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let dst = (iy as usize * w + ix as usize) * self.cin;
                        let src = (ky * 3 + kx) * self.cin;
                        for c in 0..self.cin {
                            dx[dst + c] += row[src + c];
                        }
                    }
                }
            }
        }
        Some(dx)
    }
}

impl<S> Params<S> for Conv3x3<S> {
    fn tensors(&self) -> Vec<&Vec<S>> {
        vec![&self.w, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        vec![&mut self.w, &mut self.b]
    }
    fn specs(&self, prefix: &str) -> Vec<TensorSpec> {
        vec![
            (format!("{prefix}.weight"), vec![3, 3, self.cin, self.cout]),
            (format!("{prefix}.bias"), vec![self.cout]),
        ]
    }
}

/// Depthwise 3×3 convolution, padding 1, one filter per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Depthwise3x3<S> {
    pub channels: usize,
    pub stride: usize,
    /// `(ky·3 + kx) · channels + c`.
    pub w: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Scalar> Depthwise3x3<S> {
    pub fn init<R: Rng>(rng: &mut R, channels: usize, stride: usize) -> Self {
        Depthwise3x3 {
            channels,
            stride,
            w: he_init(rng, 9 * channels, 9, 1.0),
            b: vec![S::zero(); channels],
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (out_side(h, self.stride), out_side(w, self.stride))
    }

    pub fn forward(&self, x: &[S], h: usize, w: usize) -> Vec<S> {
        let c = self.channels;
        let (ho, wo) = self.out_dims(h, w);
        let mut y = Vec::with_capacity(ho * wo * c);
        for oy in 0..ho {
            for ox in 0..wo {
                let start = y.len();
                y.extend_from_slice(&self.b);
                let yo = &mut y[start..start + c];
                for ky in 0..3 {
                    let iy = (oy * self.stride + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * self.stride + kx) as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let xs = &x[(iy as usize * w + ix as usize) * c..][..c];
                        let ws = &self.w[(ky * 3 + kx) * c..][..c];
                        for ((o, &xv), &wv) in yo.iter_mut().zip(xs).zip(ws) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, x: &[S], h: usize, w: usize, dy: &[S], grad: &mut Depthwise3x3<S>, want_dx: bool) -> Option<Vec<S>> {
        let c = self.channels;
        let (ho, wo) = self.out_dims(h, w);
        let mut dx = if want_dx { vec![S::zero(); h * w * c] } else { Vec::new() };
        for oy in 0..ho {
            for ox in 0..wo {
                let g = &dy[(oy * wo + ox) * c..][..c];
                for (db, &gv) in grad.b.iter_mut().zip(g) {
                    *db += gv;
                }
                for ky in 0..3 {
                    let iy = (oy * self.stride + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * self.stride + kx) as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let base = (iy as usize * w + ix as usize) * c;
                        let k = (ky * 3 + kx) * c;
                        let xs = &x[base..base + c];
                        for ((dw, &xv), &gv) in grad.w[k..k + c].iter_mut().zip(xs).zip(g) {
                            *dw += xv * gv;
                        }
                        if want_dx {
                            let ws = &self.w[k..k + c];
                            for ((d, &wv), &gv) in dx[base..base + c].iter_mut().zip(ws).zip(g) {
                                *d += wv * gv;
                            }
                        }
                    }
                }
            }
        }
        want_dx.then_some(dx)
    }
}

impl<S> Params<S> for Depthwise3x3<S> {
    fn tensors(&self) -> Vec<&Vec<S>> {
        vec![&self.w, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        vec![&mut self.w, &mut self.b]
    }
    fn specs(&self, prefix: &str) -> Vec<TensorSpec> {
        vec![
            (format!("{prefix}.weight"), vec![3, 3, self.channels]),
            (format!("{prefix}.bias"), vec![self.channels]),
        ]
    }
}

/// MobileNetV2 inverted residual: 1×1 expand (ReLU6), 3×3 depthwise
/// (ReLU6), linear 1×1 projection, identity shortcut when shapes allow.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedResidual<S> {
    pub expand: Option<Dense<S>>,
    pub depthwise: Depthwise3x3<S>,
    pub project: Dense<S>,
    pub residual: bool,
}

pub struct BlockCache<S> {
    x: Vec<S>,
    e_pre: Vec<S>,
    e: Vec<S>,
    d_pre: Vec<S>,
    d: Vec<S>,
    h: usize,
    w: usize,
}

impl<S: Scalar> InvertedResidual<S> {
    pub fn init<R: Rng>(rng: &mut R, cin: usize, cout: usize, expansion: usize, stride: usize) -> Self {
        let hidden = cin * expansion.max(1);
        InvertedResidual {
            expand: (expansion > 1).then(|| Dense::init(rng, cin, hidden, 1.0)),
            depthwise: Depthwise3x3::init(rng, hidden, stride),
            // linear bottleneck: smaller gain keeps the residual stream tame
            project: Dense::init(rng, hidden, cout, 0.5),
            residual: stride == 1 && cin == cout,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.expand.as_ref().map_or(self.depthwise.channels, |e| e.inp)
    }

    pub fn out_channels(&self) -> usize {
        self.project.out
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        self.depthwise.out_dims(h, w)
    }

    pub fn forward(&self, x: &[S], h: usize, w: usize) -> (Vec<S>, BlockCache<S>) {
        let (e_pre, e) = match &self.expand {
            Some(ex) => {
                let pre = ex.forward(x, h * w);
                let act = relu6(&pre);
                (pre, act)
            }
            None => (Vec::new(), x.to_vec()),
        };
        let d_pre = self.depthwise.forward(&e, h, w);
        let d = relu6(&d_pre);
        let (ho, wo) = self.out_dims(h, w);
        let mut y = self.project.forward(&d, ho * wo);
        if self.residual {
            for (o, &xv) in y.iter_mut().zip(x) {
                *o += xv;
            }
        }
        (
            y,
            BlockCache {
                x: x.to_vec(),
                e_pre,
                e,
                d_pre,
                d,
                h,
                w,
            },
        )
    }

    pub fn backward(&self, cache: &BlockCache<S>, dy: &[S], grad: &mut InvertedResidual<S>, want_dx: bool) -> Option<Vec<S>> {
        let (h, w) = (cache.h, cache.w);
        let (ho, wo) = self.out_dims(h, w);
        let mut dd = self
            .project
            .backward(&cache.d, ho * wo, dy, &mut grad.project, true)
            .expect("dx requested");
        relu6_backward(&cache.d_pre, &mut dd);
        let need_de = want_dx || self.expand.is_some();
        let de = self
            .depthwise
            .backward(&cache.e, h, w, &dd, &mut grad.depthwise, need_de);
        let mut dx = match (&self.expand, de) {
            (Some(ex), Some(mut de)) => {
                relu6_backward(&cache.e_pre, &mut de);
                ex.backward(&cache.x, h * w, &de, grad.expand.as_mut().expect("grad mirrors"), want_dx)
            }
            (None, de) => de,
            (Some(_), None) => None,
        };
        if self.residual {
            if let Some(dx) = dx.as_mut() {
                for (d, &g) in dx.iter_mut().zip(dy) {
                    *d += g;
                }
            }
        }
        dx
    }
}

impl<S> Params<S> for InvertedResidual<S> {
    fn tensors(&self) -> Vec<&Vec<S>> {
        let mut t = Vec::new();
        if let Some(e) = &self.expand {
            t.extend(e.tensors());
        }
        t.extend(self.depthwise.tensors());
        t.extend(self.project.tensors());
        t
    }
    fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut t = Vec::new();
        if let Some(e) = &mut self.expand {
            t.extend(e.tensors_mut());
        }
        t.extend(self.depthwise.tensors_mut());
        t.extend(self.project.tensors_mut());
        t
    }
    fn specs(&self, prefix: &str) -> Vec<TensorSpec> {
        let mut t = Vec::new();
        if let Some(e) = &self.expand {
            t.extend(e.specs(&format!("{prefix}.expand")));
        }
        t.extend(self.depthwise.specs(&format!("{prefix}.depthwise")));
        t.extend(self.project.specs(&format!("{prefix}.project")));
        t
    }
}

/// Zeroed copy with identical structure, used as a gradient accumulator.
pub fn zeros_like<S: Scalar, P: Params<S> + Clone>(p: &P) -> P {
    let mut z = p.clone();
    for t in z.tensors_mut() {
        t.iter_mut().for_each(|v| *v = S::zero());
    }
    z
}
