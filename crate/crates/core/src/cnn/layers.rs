//! Batched layer primitives on NHWC buffers.
//!
//! Every backward function takes the upstream gradient of the layer output
//! and returns gradients for its input and parameters. Convolution weights are
//! stored as `[ky][kx][in][out]`; dense weights as `[in]`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::scalar::Real;

/// Batch of `n` images of `h x w x c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Dims {
    pub fn new(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self { n, h, w, c }
    }

    pub fn len(&self) -> usize {
        self.n * self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn per_image(&self) -> usize {
        self.h * self.w * self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Gelu => x * phi_cdf(x),
        }
    }

    /// Derivative; ReLU takes 0 at the kink.
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Gelu => {
                let pdf = (-x * x / T::of(2.0)).exp() / (T::TAU()).sqrt();
                phi_cdf(x) + x * pdf
            }
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
        })
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

/// Standard normal CDF.
fn phi_cdf<T: Real>(x: T) -> T {
    let e = libm::erf(x.to_f64_lossy() / std::f64::consts::SQRT_2);
    T::of(0.5 * (1.0 + e))
}

pub fn activation_forward<T: Real>(act: Activation, z: &[T]) -> Vec<T> {
    z.iter().map(|&v| act.apply(v)).collect()
}

pub fn activation_backward<T: Real>(act: Activation, z: &[T], dout: &[T]) -> Vec<T> {
    z.iter().zip(dout).map(|(&v, &g)| g * act.derivative(v)).collect()
}

/// Valid, stride-1 convolution with a `k x k` kernel.
pub fn conv2d_forward<T: Real>(x: &[T], d: Dims, w: &[T], b: &[T], k: usize, cout: usize) -> (Vec<T>, Dims) {
    let od = Dims::new(d.n, d.h + 1 - k, d.w + 1 - k, cout);
    debug_assert_eq!(w.len(), k * k * d.c * cout);
    let mut out = vec![T::zero(); od.len()];
    for img in 0..d.n {
        for oy in 0..od.h {
            for ox in 0..od.w {
                let o = ((img * od.h + oy) * od.w + ox) * cout;
                let acc = &mut out[o..o + cout];
                acc.copy_from_slice(b);
                for ky in 0..k {
                    for kx in 0..k {
                        let xi = ((img * d.h + oy + ky) * d.w + ox + kx) * d.c;
                        let wi = (ky * k + kx) * d.c * cout;
                        for ci in 0..d.c {
                            let xv = x[xi + ci];
                            let wrow = &w[wi + ci * cout..wi + (ci + 1) * cout];
                            for (a, &wv) in acc.iter_mut().zip(wrow) {
                                *a += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    (out, od)
}

/// Returns `(dx, dw, db)`.
pub fn conv2d_backward<T: Real>(
    x: &[T],
    d: Dims,
    w: &[T],
    k: usize,
    cout: usize,
    dout: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (oh, ow) = (d.h + 1 - k, d.w + 1 - k);
    let mut dx = vec![T::zero(); d.len()];
    let mut dw = vec![T::zero(); w.len()];
    let mut db = vec![T::zero(); cout];
    for img in 0..d.n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o = ((img * oh + oy) * ow + ox) * cout;
                let g = &dout[o..o + cout];
                for (acc, &gv) in db.iter_mut().zip(g) {
                    *acc += gv;
                }
                for ky in 0..k {
                    for kx in 0..k {
                        let xi = ((img * d.h + oy + ky) * d.w + ox + kx) * d.c;
                        let wi = (ky * k + kx) * d.c * cout;
                        for ci in 0..d.c {
                            let xv = x[xi + ci];
                            let span = wi + ci * cout..wi + (ci + 1) * cout;
                            let mut s = T::zero();
                            for ((dwv, &wv), &gv) in dw[span.clone()].iter_mut().zip(&w[span]).zip(g) {
                                *dwv += xv * gv;
                                s += wv * gv;
                            }
                            dx[xi + ci] += s;
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Batch statistics kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased variance.
    pub var: Vec<T>,
    pub inv_std: Vec<T>,
    pub xhat: Vec<T>,
}

/// Per-channel normalisation over batch and spatial positions.
pub fn batchnorm_train<T: Real>(x: &[T], c: usize, gamma: &[T], beta: &[T], eps: T) -> (Vec<T>, BatchStats<T>) {
    let count = T::of_usize(x.len() / c);
    let mut mean = vec![T::zero(); c];
    for row in x.chunks_exact(c) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![T::zero(); c];
    for row in x.chunks_exact(c) {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= count);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for ((xr, hr), yr) in x
        .chunks_exact(c)
        .zip(xhat.chunks_exact_mut(c))
        .zip(y.chunks_exact_mut(c))
    {
        for ch in 0..c {
            hr[ch] = (xr[ch] - mean[ch]) * inv_std[ch];
            yr[ch] = gamma[ch] * hr[ch] + beta[ch];
        }
    }
    (
        y,
        BatchStats {
            mean,
            var,
            inv_std,
            xhat,
        },
    )
}

pub fn batchnorm_infer<T: Real>(x: &[T], c: usize, gamma: &[T], beta: &[T], mean: &[T], var: &[T], eps: T) -> Vec<T> {
    let scale: Vec<T> = (0..c).map(|ch| gamma[ch] / (var[ch] + eps).sqrt()).collect();
    let mut y = vec![T::zero(); x.len()];
    for (xr, yr) in x.chunks_exact(c).zip(y.chunks_exact_mut(c)) {
        for ch in 0..c {
            yr[ch] = (xr[ch] - mean[ch]) * scale[ch] + beta[ch];
        }
    }
    y
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batchnorm_backward<T: Real>(dy: &[T], c: usize, stats: &BatchStats<T>, gamma: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let count = T::of_usize(dy.len() / c);
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (g, h) in dy.chunks_exact(c).zip(stats.xhat.chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += g[ch] * h[ch];
            dbeta[ch] += g[ch];
        }
    }
    let mut dx = vec![T::zero(); dy.len()];
    for ((g, h), out) in dy
        .chunks_exact(c)
        .zip(stats.xhat.chunks_exact(c))
        .zip(dx.chunks_exact_mut(c))
    {
        for ch in 0..c {
            // d xhat = gamma * dy; sums of d xhat are gamma * dbeta and gamma * dgamma
            let centred = g[ch] - (dbeta[ch] + h[ch] * dgamma[ch]) / count;
            out[ch] = gamma[ch] * stats.inv_std[ch] * centred;
        }
    }
    (dx, dgamma, dbeta)
}

/// 2x2 max pooling with stride 2; trailing rows and columns are dropped.
/// Also returns, per output, the flat input index that won (first on ties).
pub fn maxpool_forward<T: Real>(x: &[T], d: Dims) -> (Vec<T>, Vec<usize>, Dims) {
    let od = Dims::new(d.n, d.h / 2, d.w / 2, d.c);
    let mut out = vec![T::zero(); od.len()];
    let mut arg = vec![0usize; od.len()];
    for img in 0..d.n {
        for oy in 0..od.h {
            for ox in 0..od.w {
                for ch in 0..d.c {
                    let mut best = usize::MAX;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let i = ((img * d.h + 2 * oy + dy) * d.w + 2 * ox + dx) * d.c + ch;
                        if best == usize::MAX || x[i] > x[best] {
                            best = i;
                        }
                    }
                    let o = ((img * od.h + oy) * od.w + ox) * d.c + ch;
                    out[o] = x[best];
                    arg[o] = best;
                }
            }
        }
    }
    (out, arg, od)
}

pub fn maxpool_backward<T: Real>(dout: &[T], argmax: &[usize], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&g, &i) in dout.iter().zip(argmax) {
        dx[i] += g;
    }
    dx
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<T: Real>(len: usize, rate: f64, rng: &mut Rng) -> Vec<T> {
    if rate <= 0.0 {
        return vec![T::one(); len];
    }
    let keep = T::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

pub fn apply_mask<T: Real>(x: &[T], mask: &[T]) -> Vec<T> {
    x.iter().zip(mask).map(|(&a, &m)| a * m).collect()
}

/// Single-output dense layer over `n` rows of `d` features.
pub fn dense_forward<T: Real>(x: &[T], d: usize, w: &[T], b: T) -> Vec<T> {
    x.chunks_exact(d)
        .map(|row| row.iter().zip(w).fold(b, |acc, (&a, &wv)| acc + a * wv))
        .collect()
}

/// Returns `(dx, dw, db)`.
pub fn dense_backward<T: Real>(x: &[T], d: usize, w: &[T], dout: &[T]) -> (Vec<T>, Vec<T>, T) {
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); d];
    let mut db = T::zero();
    for ((row, drow), &g) in x.chunks_exact(d).zip(dx.chunks_exact_mut(d)).zip(dout) {
        db += g;
        for j in 0..d {
            dw[j] += row[j] * g;
            drow[j] = w[j] * g;
        }
    }
    (dx, dw, db)
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Probability clamp applied before taking logarithms.
pub const BCE_CLAMP: f64 = 1e-12;

/// Mean binary cross-entropy; probabilities are clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn loss_bce<T: Real>(probs: &[T], labels: &[u8]) -> T {
    let lo = T::of(BCE_CLAMP);
    let hi = T::one() - lo;
    let total: T = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.max(lo).min(hi);
            if y == 1 {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum();
    total / T::of_usize(probs.len().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn random(len: usize, rng: &mut Rng) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn bce_examples() {
        assert!((loss_bce(&[0.5f64], &[1]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(loss_bce(&[1.0f64 - 1e-15], &[1]) < 1e-11);
        assert!((loss_bce(&[0.9f64, 0.1], &[1, 0]) - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!(loss_bce(&[0.0f64], &[1]).is_finite());
    }

    #[test]
    fn maxpool_floors_odd_sizes() {
        let d = Dims::new(1, 27, 27, 64);
        let (_, _, od) = maxpool_forward(&vec![0.0; d.len()], d);
        assert_eq!((od.h, od.w, od.c), (13, 13, 64));
    }

    #[test]
    fn conv_with_zero_input_has_zero_weight_gradient() {
        let mut rng = stream(1, 0);
        let d = Dims::new(2, 4, 4, 3);
        let w = random(2 * 2 * 3 * 5, &mut rng);
        let dout = random(2 * 3 * 3 * 5, &mut rng);
        let (_, dw, db) = conv2d_backward(&vec![0.0; d.len()], d, &w, 2, 5, &dout);
        assert!(dw.iter().all(|&v| v == 0.0));
        assert!(db.iter().all(|&v| v != 0.0));
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = stream(2, 0);
        let d = Dims::new(1, 3, 3, 2);
        let x = random(d.len(), &mut rng);
        let w = random(2 * 2 * 2 * 3, &mut rng);
        let b = random(3, &mut rng);
        let (y, od) = conv2d_forward(&x, d, &w, &b, 2, 3);
        assert_eq!((od.h, od.w, od.c), (2, 2, 3));
        for oy in 0..2 {
            for ox in 0..2 {
                for co in 0..3 {
                    let mut s = b[co];
                    for ky in 0..2 {
                        for kx in 0..2 {
                            for ci in 0..2 {
                                s += x[((oy + ky) * 3 + ox + kx) * 2 + ci] * w[((ky * 2 + kx) * 2 + ci) * 3 + co];
                            }
                        }
                    }
                    assert!((y[(oy * 2 + ox) * 3 + co] - s).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn frozen_batchnorm_is_affine_per_channel() {
        let mut rng = stream(3, 0);
        let (gamma, beta) = (random(3, &mut rng), random(3, &mut rng));
        let (mean, var) = (random(3, &mut rng), vec![0.5, 1.5, 2.0]);
        let x = random(30, &mut rng);
        let y = batchnorm_infer(&x, 3, &gamma, &beta, &mean, &var, 1e-3);
        let y0 = batchnorm_infer(&[0.0; 3], 3, &gamma, &beta, &mean, &var, 1e-3);
        let y1 = batchnorm_infer(&[1.0; 3], 3, &gamma, &beta, &mean, &var, 1e-3);
        for (k, (&xv, &yv)) in x.iter().zip(&y).enumerate() {
            let ch = k % 3;
            assert!((yv - (y0[ch] + xv * (y1[ch] - y0[ch]))).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = stream(4, 0);
        let trials = 20_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let m: Vec<f64> = dropout_mask(1, 0.6, &mut rng);
            sum += 0.8 * m[0];
        }
        let mean = sum / trials as f64;
        assert!((mean - 0.8).abs() / 0.8 < 0.02, "{mean}");
        assert!(dropout_mask::<f64>(5, 0.0, &mut rng).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        assert_eq!(Activation::Gelu.apply(0.0), 0.0);
        // x * Phi(x) at 1
        assert!((Activation::Gelu.apply(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((Activation::Gelu.derivative(0.0f64) - 0.5).abs() < 1e-15);
        assert_eq!("GELU".parse::<Activation>().unwrap(), Activation::Gelu);
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
    }
}
