//! Row-major matrix kernels. Every kernel processes rows independently in a
//! fixed order, so a row's result never depends on where it sits in the
//! batch.

use super::Scalar;

/// `y = x · w + b` for `x: rows × inp`, `w: inp × out`.
pub fn affine<S: Scalar>(x: &[S], rows: usize, inp: usize, w: &[S], b: &[S], out: usize) -> Vec<S> {
    debug_assert_eq!(x.len(), rows * inp);
    debug_assert_eq!(w.len(), inp * out);
    let mut y = Vec::with_capacity(rows * out);
    for r in 0..rows {
        y.extend_from_slice(b);
        let yr = &mut y[r * out..(r + 1) * out];
        for (i, &xv) in x[r * inp..(r + 1) * inp].iter().enumerate() {
            if xv == S::zero() {
                continue;
            }
            for (yo, &wv) in yr.iter_mut().zip(&w[i * out..(i + 1) * out]) {
                *yo += xv * wv;
            }
        }
    }
    y
}

/// `dw += xᵀ · dy`, `db += Σ_rows dy`.
pub fn affine_param_grad<S: Scalar>(
    x: &[S],
    rows: usize,
    inp: usize,
    dy: &[S],
    out: usize,
    dw: &mut [S],
    db: &mut [S],
) {
    for r in 0..rows {
        let dyr = &dy[r * out..(r + 1) * out];
        for (d, &g) in db.iter_mut().zip(dyr) {
            *d += g;
        }
        for (i, &xv) in x[r * inp..(r + 1) * inp].iter().enumerate() {
            if xv == S::zero() {
                continue;
            }
            for (d, &g) in dw[i * out..(i + 1) * out].iter_mut().zip(dyr) {
                *d += xv * g;
            }
        }
    }
}

/// `dx = dy · wᵀ`.
pub fn affine_input_grad<S: Scalar>(dy: &[S], rows: usize, out: usize, w: &[S], inp: usize) -> Vec<S> {
    let mut dx = vec![S::zero(); rows * inp];
    for r in 0..rows {
        let dyr = &dy[r * out..(r + 1) * out];
        for i in 0..inp {
            let wi = &w[i * out..(i + 1) * out];
            let mut acc = S::zero();
            for (&g, &wv) in dyr.iter().zip(wi) {
                acc += g * wv;
            }
            dx[r * inp + i] = acc;
        }
    }
    dx
}

pub fn relu<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter().map(|&v| v.max(S::zero())).collect()
}

pub fn relu_backward<S: Scalar>(pre: &[S], dy: &mut [S]) {
    for (g, &p) in dy.iter_mut().zip(pre) {
        if p <= S::zero() {
            *g = S::zero();
        }
    }
}

pub fn relu6<S: Scalar>(x: &[S]) -> Vec<S> {
    let six = S::of(6.0);
    x.iter().map(|&v| v.max(S::zero()).min(six)).collect()
}

pub fn relu6_backward<S: Scalar>(pre: &[S], dy: &mut [S]) {
    let six = S::of(6.0);
    for (g, &p) in dy.iter_mut().zip(pre) {
        if p <= S::zero() || p >= six {
            *g = S::zero();
        }
    }
}

/// Numerically stable softmax in f64.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<f64> {
    let max = logits.iter().map(|v| v.to_f64().unwrap()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.to_f64().unwrap() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_small() {
        // [1 2] · [[1 0 1],[0 1 1]] + [0 0 1] = [1 2 4]
        let y = affine(&[1.0f64, 2.0], 1, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 1.0], 3);
        assert_eq!(y, vec![1.0, 2.0, 4.0]);
        let dx = affine_input_grad(&[1.0f64, 1.0, 1.0], 1, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0], 2);
        assert_eq!(dx, vec![2.0, 2.0]);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0f32, 1001.0, 999.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[1] > p[0] && p[0] > p[2]);
    }
}
