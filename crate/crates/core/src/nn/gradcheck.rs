//! Central finite-difference checks of every analytic backward pass, run in
//! `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::layers::{zeros_like, Conv3x3, Dense, Depthwise3x3, InvertedResidual, Params};
use super::ops::{relu, relu6, relu6_backward, relu_backward, softmax};
use super::{ArchConfig, BlockSpec, Branches, GradScope, Network};

const STEP: f64 = 1e-5;
/// Denominator floor so coordinates with vanishing gradient compare absolutely.
const FLOOR: f64 = 1e-6;
const KINK_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheck {
    pub name: String,
    pub probes: usize,
    pub max_rel_error: f64,
    /// Draws rejected because they sat on a non-differentiable point.
    pub kinks_skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central difference at coordinate `i`, or `None` when the one-sided
/// differences disagree, i.e. the step straddles a ReLU kink or a max-pool
/// switch and the function is not differentiable there.
fn central(f: &dyn Fn(f64) -> f64) -> Option<f64> {
    let (lp, l0, lm) = (f(STEP), f(0.0), f(-STEP));
    let fwd = (lp - l0) / STEP;
    let bwd = (l0 - lm) / STEP;
    if (fwd - bwd).abs() > KINK_TOL * fwd.abs().max(bwd.abs()).max(FLOOR) {
        return None;
    }
    Some((lp - lm) / (2.0 * STEP))
}

/// Probes `probes` smooth coordinates; kinked draws are redrawn, at most
/// `probes` times in total.
fn run_probes(
    total: usize,
    analytic: &dyn Fn(usize) -> f64,
    at: &dyn Fn(usize, f64) -> f64,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let (mut done, mut kinks) = (0, 0);
    while done < probes {
        let i = rng.random_range(0..total);
        match central(&|h| at(i, h)) {
            Some(numeric) => {
                worst = worst.max(relative_error(analytic(i), numeric));
                done += 1;
            }
            None if kinks < probes => kinks += 1,
            None => {
                worst = f64::INFINITY;
                done += 1;
            }
        }
    }
    (worst, kinks)
}

fn probe_params<P: Params<f64> + Clone>(
    p: &P,
    grad: &P,
    loss: &dyn Fn(&P) -> f64,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, usize) {
    let sizes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let locate = |flat: usize| {
        let (mut t, mut i) = (0, flat);
        while i >= sizes[t] {
            i -= sizes[t];
            t += 1;
        }
        (t, i)
    };
    let at = |flat: usize, h: f64| {
        let (t, i) = locate(flat);
        let mut q = p.clone();
        q.tensors_mut()[t][i] += h;
        loss(&q)
    };
    run_probes(total, &|i| analytic[i], &at, probes, rng)
}

fn probe_input(
    x: &[f64],
    dx: &[f64],
    loss: &dyn Fn(&[f64]) -> f64,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, usize) {
    let at = |i: usize, h: f64| {
        let mut xp = x.to_vec();
        xp[i] += h;
        loss(&xp)
    };
    run_probes(x.len(), &|i| dx[i], &at, probes, rng)
}

fn merge(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    (a.0.max(b.0), a.1 + b.1)
}

fn result(name: &str, probes: usize, (err, kinks): (f64, usize)) -> GradCheck {
    GradCheck {
        name: name.to_string(),
        probes,
        max_rel_error: err,
        kinks_skipped: kinks,
    }
}

fn check_dense(rng: &mut ChaCha8Rng, probes: usize) -> GradCheck {
    let (rows, inp, out) = (3, 5, 4);
    let layer = Dense::<f64>::init(rng, inp, out, 1.0);
    let mut layer = layer;
    layer.b = normals(rng, out);
    let x = normals(rng, rows * inp);
    let r = normals(rng, rows * out);
    let mut g = zeros_like(&layer);
    let dx = layer.backward(&x, rows, &r, &mut g, true).unwrap();
    let e1 = probe_params(&layer, &g, &|l: &Dense<f64>| dot(&l.forward(&x, rows), &r), probes, rng);
    let e2 = probe_input(&x, &dx, &|x| dot(&layer.forward(x, rows), &r), probes, rng);
    result("dense", 2 * probes, merge(e1, e2))
}

fn check_conv(rng: &mut ChaCha8Rng, probes: usize, stride: usize) -> GradCheck {
    let (h, w, cin, cout) = (7, 6, 2, 3);
    let mut layer = Conv3x3::<f64>::init(rng, cin, cout, stride);
    layer.b = normals(rng, cout);
    let x = normals(rng, h * w * cin);
    let (ho, wo) = layer.out_dims(h, w);
    let r = normals(rng, ho * wo * cout);
    let (_, cache) = layer.forward(&x, h, w);
    let mut g = zeros_like(&layer);
    let dx = layer.backward(&cache, &r, &mut g, true).unwrap();
    let e1 = probe_params(&layer, &g, &|l: &Conv3x3<f64>| dot(&l.forward(&x, h, w).0, &r), probes, rng);
    let e2 = probe_input(&x, &dx, &|x| dot(&layer.forward(x, h, w).0, &r), probes, rng);
    result(&format!("conv3x3/stride{stride}"), 2 * probes, merge(e1, e2))
}

fn check_depthwise(rng: &mut ChaCha8Rng, probes: usize, stride: usize) -> GradCheck {
    let (h, w, c) = (6, 7, 3);
    let mut layer = Depthwise3x3::<f64>::init(rng, c, stride);
    layer.b = normals(rng, c);
    let x = normals(rng, h * w * c);
    let (ho, wo) = layer.out_dims(h, w);
    let r = normals(rng, ho * wo * c);
    let mut g = zeros_like(&layer);
    let dx = layer.backward(&x, h, w, &r, &mut g, true).unwrap();
    let e1 = probe_params(&layer, &g, &|l: &Depthwise3x3<f64>| dot(&l.forward(&x, h, w), &r), probes, rng);
    let e2 = probe_input(&x, &dx, &|x| dot(&layer.forward(x, h, w), &r), probes, rng);
    result(&format!("depthwise3x3/stride{stride}"), 2 * probes, merge(e1, e2))
}

fn check_block(rng: &mut ChaCha8Rng, probes: usize, cin: usize, cout: usize, stride: usize) -> GradCheck {
    let (h, w) = (6, 5);
    let mut block = InvertedResidual::<f64>::init(rng, cin, cout, 3, stride);
    randomize_biases(&mut block, rng);
    let x = normals(rng, h * w * cin);
    let (ho, wo) = block.out_dims(h, w);
    let r = normals(rng, ho * wo * cout);
    let (_, cache) = block.forward(&x, h, w);
    let mut g = zeros_like(&block);
    let dx = block.backward(&cache, &r, &mut g, true).unwrap();
    let e1 = probe_params(
        &block,
        &g,
        &|b: &InvertedResidual<f64>| dot(&b.forward(&x, h, w).0, &r),
        probes,
        rng,
    );
    let e2 = probe_input(&x, &dx, &|x| dot(&block.forward(x, h, w).0, &r), probes, rng);
    let kind = if block.residual { "residual" } else { "projection" };
    result(&format!("inverted-residual/{kind}/stride{stride}"), 2 * probes, merge(e1, e2))
}

fn check_activation(rng: &mut ChaCha8Rng, probes: usize, six: bool) -> GradCheck {
    let x: Vec<f64> = normals(rng, 64).into_iter().map(|v| v * 5.0).collect();
    let r = normals(rng, 64);
    let mut dx = r.clone();
    let f: &dyn Fn(&[f64]) -> f64 = if six {
        relu6_backward(&x, &mut dx);
        &|x| dot(&relu6(x), &r)
    } else {
        relu_backward(&x, &mut dx);
        &|x| dot(&relu(x), &r)
    };
    let err = probe_input(&x, &dx, f, probes, rng);
    result(if six { "relu6" } else { "relu" }, probes, err)
}

fn check_softmax_ce(rng: &mut ChaCha8Rng, probes: usize) -> GradCheck {
    let z = normals(rng, 6);
    let label = 2;
    let p = softmax(&z);
    let dz: Vec<f64> = p.iter().enumerate().map(|(k, &v)| v - f64::from(k == label)).collect();
    let err = probe_input(&z, &dz, &|z| -softmax(z)[label].ln(), probes, rng);
    result("softmax-cross-entropy", probes, err)
}

/// Zero-initialized biases put all-zero rows exactly on activation kinks.
fn randomize_biases<P: Params<f64>>(p: &mut P, rng: &mut ChaCha8Rng) {
    let specs = p.specs("");
    for (t, (name, _)) in p.tensors_mut().into_iter().zip(specs) {
        if name.ends_with(".bias") {
            let noise = normals(rng, t.len());
            t.iter_mut().zip(noise).for_each(|(v, n)| *v = 0.1 * n);
        }
    }
}

fn tiny_arch(branches: Branches) -> ArchConfig {
    ArchConfig {
        branches,
        classes: vec!["a".into(), "b".into(), "c".into()],
        image_side: 12,
        view_count: 2,
        stem_channels: 4,
        blocks: vec![
            BlockSpec {
                expansion: 2,
                channels: 5,
                repeats: 2,
                stride: 2,
            },
            BlockSpec {
                expansion: 3,
                channels: 6,
                repeats: 1,
                stride: 1,
            },
        ],
        image_dim: 7,
        point_count: 10,
        point_layers: vec![6, 8],
    }
}

fn check_network(rng: &mut ChaCha8Rng, probes: usize, branches: Branches) -> GradCheck {
    let arch = tiny_arch(branches);
    let mut net = Network::<f64>::init(&arch, rng.random()).expect("valid arch");
    randomize_biases(&mut net, rng);
    let side = arch.image_side;
    let views: Vec<Vec<f64>> = (0..arch.view_count)
        .map(|_| (0..side * side).map(|_| rng.random::<f64>()).collect())
        .collect();
    let points = normals(rng, arch.point_count * 3);
    let label = 1;
    let loss = |n: &Network<f64>| {
        let slices: Vec<&[f64]> = views.iter().map(|v| v.as_slice()).collect();
        let mut scratch = n.zeros_like();
        n.loss_and_grad(&slices, &points, label, 1.0, GradScope::All, &mut scratch)
            .expect("valid inputs")
            .0
    };
    let slices: Vec<&[f64]> = views.iter().map(|v| v.as_slice()).collect();
    let mut g = net.zeros_like();
    net.loss_and_grad(&slices, &points, label, 1.0, GradScope::All, &mut g)
        .expect("valid inputs");
    let err = probe_params(&net, &g, &loss, probes, rng);
    let what = match branches {
        Branches::Joint => "network/joint",
        Branches::Image => "network/image (global average pool)",
        Branches::Point => "network/point (max pool)",
    };
    result(what, probes, err)
}

/// Runs every check with `probes` random coordinates each.
pub fn run_all(seed: u64, probes: usize) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    vec![
        check_dense(r, probes),
        check_conv(r, probes, 1),
        check_conv(r, probes, 2),
        check_depthwise(r, probes, 1),
        check_depthwise(r, probes, 2),
        check_block(r, probes, 4, 4, 1),
        check_block(r, probes, 3, 5, 2),
        check_activation(r, probes, false),
        check_activation(r, probes, true),
        check_softmax_ce(r, probes),
        check_network(r, probes, Branches::Joint),
        check_network(r, probes, Branches::Image),
        check_network(r, probes, Branches::Point),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_layers_pass() {
        for c in run_all(7, 20) {
            assert!(c.max_rel_error < 1e-4, "{}: {:e}", c.name, c.max_rel_error);
        }
    }
}
