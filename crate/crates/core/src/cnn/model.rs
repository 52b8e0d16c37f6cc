use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{
    activation_backward, activation_forward, apply_mask, batchnorm_backward, batchnorm_infer, batchnorm_train,
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_mask, maxpool_backward, maxpool_forward,
    sigmoid, Activation, BatchStats, Dims,
};
use super::{CnnError, Result};
use crate::rng::{stream, Rng};
use crate::scalar::Real;

pub const FILTERS: usize = 64;
pub const KERNEL: usize = 2;
pub const BN_EPS: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.99;

/// `(height, width, channels)` of one input image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Conv(64, 2x2) -> act -> BatchNorm -> MaxPool(2) -> Conv(64, 2x2) -> act ->
/// Dropout -> Flatten -> Dropout -> Dense(1) -> sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: InputShape,
    pub activation: Activation,
    pub dropout: f64,
}

/// One row of the layer table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerInfo {
    pub name: &'static str,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamReport {
    pub layers: Vec<LayerInfo>,
    pub total: usize,
}

impl Architecture {
    pub fn new(input: InputShape, activation: Activation, dropout: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(CnnError::InvalidConfig(format!("dropout {dropout} outside [0, 1)")));
        }
        let arch = Self {
            input,
            activation,
            dropout,
        };
        arch.shapes()?;
        Ok(arch)
    }

    /// `(conv1, pool, conv2)` spatial sizes.
    fn shapes(&self) -> Result<[(usize, usize); 3]> {
        let InputShape {
            height,
            width,
            channels,
        } = self.input;
        if channels == 0 || height < KERNEL || width < KERNEL {
            return Err(CnnError::Shape(format!("input {height}x{width}x{channels} too small")));
        }
        let c1 = (height + 1 - KERNEL, width + 1 - KERNEL);
        let p = (c1.0 / 2, c1.1 / 2);
        if p.0 < KERNEL || p.1 < KERNEL {
            return Err(CnnError::Shape(format!(
                "input {height}x{width} too small for two convolutions"
            )));
        }
        let c2 = (p.0 + 1 - KERNEL, p.1 + 1 - KERNEL);
        Ok([c1, p, c2])
    }

    pub fn flat_features(&self) -> usize {
        let [_, _, c2] = self.shapes().expect("validated");
        c2.0 * c2.1 * FILTERS
    }

    fn conv1_len(&self) -> usize {
        KERNEL * KERNEL * self.input.channels * FILTERS
    }

    fn conv2_len(&self) -> usize {
        KERNEL * KERNEL * FILTERS * FILTERS
    }

    /// Output shapes and trainable-parameter counts per layer. Batch
    /// normalisation counts scale, shift and both running statistics.
    pub fn param_report(&self) -> ParamReport {
        let [c1, p, c2] = self.shapes().expect("validated");
        let flat = self.flat_features();
        let layers = vec![
            LayerInfo {
                name: "Conv2D",
                output_shape: vec![c1.0, c1.1, FILTERS],
                params: self.conv1_len() + FILTERS,
            },
            LayerInfo {
                name: "BatchNormalization",
                output_shape: vec![c1.0, c1.1, FILTERS],
                params: 4 * FILTERS,
            },
            LayerInfo {
                name: "MaxPooling2D",
                output_shape: vec![p.0, p.1, FILTERS],
                params: 0,
            },
            LayerInfo {
                name: "Conv2D",
                output_shape: vec![c2.0, c2.1, FILTERS],
                params: self.conv2_len() + FILTERS,
            },
            LayerInfo {
                name: "Dropout",
                output_shape: vec![c2.0, c2.1, FILTERS],
                params: 0,
            },
            LayerInfo {
                name: "Flatten",
                output_shape: vec![flat],
                params: 0,
            },
            LayerInfo {
                name: "Dropout",
                output_shape: vec![flat],
                params: 0,
            },
            LayerInfo {
                name: "Dense",
                output_shape: vec![1],
                params: flat + 1,
            },
        ];
        let total = layers.iter().map(|l| l.params).sum();
        ParamReport { layers, total }
    }
}

/// Layer table for the default architecture on `input`.
pub fn param_count(input: InputShape) -> Result<ParamReport> {
    Ok(Architecture::new(input, Activation::Relu, 0.0)?.param_report())
}

/// Named parameter tensors in checkpoint order.
pub const TENSOR_NAMES: [&str; 10] = [
    "conv1_w", "conv1_b", "bn_gamma", "bn_beta", "bn_mean", "bn_var", "conv2_w", "conv2_b", "dense_w", "dense_b",
];

/// Weights of one model. Tensors 4 and 5 (running mean and variance) are not
/// trained by gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: Architecture,
    pub tensors: [Vec<T>; 10],
}

/// Gradients of the eight trainable tensors, in [`TENSOR_NAMES`] order with
/// the running statistics skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: [Vec<T>; 8],
}

/// Indices into `ModelParams::tensors` covered by `Gradients`, in order.
pub const TRAINABLE: [usize; 8] = [0, 1, 2, 3, 6, 7, 8, 9];

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        Self {
            tensors: TRAINABLE.map(|i| vec![T::zero(); params.tensors[i].len()]),
        }
    }
}

impl<T: Real> ModelParams<T> {
    /// All-zero weights with unit batch-norm scale and running variance.
    pub fn zeros(arch: Architecture) -> Self {
        let flat = arch.flat_features();
        let tensors = [
            vec![T::zero(); arch.conv1_len()],
            vec![T::zero(); FILTERS],
            vec![T::one(); FILTERS],
            vec![T::zero(); FILTERS],
            vec![T::zero(); FILTERS],
            vec![T::one(); FILTERS],
            vec![T::zero(); arch.conv2_len()],
            vec![T::zero(); FILTERS],
            vec![T::zero(); flat],
            vec![T::zero(); 1],
        ];
        Self { arch, tensors }
    }

    /// He-uniform weights, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, drawn
    /// in tensor order from the init stream of `seed`; biases zero.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut p = Self::zeros(arch);
        let mut rng = stream(seed, crate::rng::STREAM_INIT);
        let fan_ins = [
            (0, KERNEL * KERNEL * arch.input.channels),
            (6, KERNEL * KERNEL * FILTERS),
            (8, arch.flat_features()),
        ];
        for (idx, fan_in) in fan_ins {
            let limit = (6.0 / fan_in as f64).sqrt();
            for v in p.tensors[idx].iter_mut() {
                *v = T::of(rng.random_range(-limit..limit));
            }
        }
        p
    }

    pub fn trainable(&self) -> [&[T]; 8] {
        TRAINABLE.map(|i| self.tensors[i].as_slice())
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Exponential moving average of batch statistics:
    /// `running = momentum * running + (1 - momentum) * batch`.
    pub fn update_running_stats(&mut self, cache: &Cache<T>, momentum: T) {
        let one_minus = T::one() - momentum;
        for (r, &b) in self.tensors[4].iter_mut().zip(&cache.bn.mean) {
            *r = momentum * *r + one_minus * b;
        }
        for (r, &b) in self.tensors[5].iter_mut().zip(&cache.bn.var) {
            *r = momentum * *r + one_minus * b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout.
    Train,
    /// Running statistics, no dropout.
    Infer,
}

/// Intermediate values of a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    pub x: Vec<T>,
    pub x_dims: Dims,
    pub z1: Vec<T>,
    pub c1_dims: Dims,
    pub bn: BatchStats<T>,
    pub pool_arg: Vec<usize>,
    pub pooled: Vec<T>,
    pub p_dims: Dims,
    pub z2: Vec<T>,
    pub mask1: Vec<T>,
    pub mask2: Vec<T>,
    pub flat: Vec<T>,
    pub probs: Vec<T>,
}

/// Runs `n` images (NHWC, flattened) through the network. Train mode draws
/// both dropout masks from a generator seeded with `dropout_seed` and returns
/// the cache needed by [`backward`].
pub fn forward<T: Real>(
    params: &ModelParams<T>,
    batch: &[T],
    n: usize,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(Vec<T>, Option<Cache<T>>)> {
    let arch = params.arch;
    let InputShape {
        height,
        width,
        channels,
    } = arch.input;
    if batch.len() != n * arch.input.len() {
        return Err(CnnError::Shape(format!(
            "batch of {} values is not {n} images of {height}x{width}x{channels}",
            batch.len()
        )));
    }
    let t = &params.tensors;
    let eps = T::of(BN_EPS);
    let x_dims = Dims::new(n, height, width, channels);
    let (z1, c1_dims) = conv2d_forward(batch, x_dims, &t[0], &t[1], KERNEL, FILTERS);
    let a1 = activation_forward(arch.activation, &z1);
    let (bn_out, stats) = match mode {
        Mode::Train => {
            let (y, s) = batchnorm_train(&a1, FILTERS, &t[2], &t[3], eps);
            (y, Some(s))
        }
        Mode::Infer => (batchnorm_infer(&a1, FILTERS, &t[2], &t[3], &t[4], &t[5], eps), None),
    };
    let (pooled, pool_arg, p_dims) = maxpool_forward(&bn_out, c1_dims);
    let (z2, c2_dims) = conv2d_forward(&pooled, p_dims, &t[6], &t[7], KERNEL, FILTERS);
    let a2 = activation_forward(arch.activation, &z2);

    let mut rng: Option<Rng> = (mode == Mode::Train).then(|| stream(dropout_seed, 0));
    let mut mask = |len: usize| match rng.as_mut() {
        Some(r) => dropout_mask(len, arch.dropout, r),
        None => vec![T::one(); len],
    };
    let mask1 = mask(c2_dims.len());
    let d1 = apply_mask(&a2, &mask1);
    let mask2 = mask(d1.len());
    let flat = apply_mask(&d1, &mask2);
    let logits = dense_forward(&flat, c2_dims.per_image(), &t[8], t[9][0]);
    if let Some(bad) = logits.iter().position(|v| !v.is_finite()) {
        return Err(CnnError::NonFiniteActivation(format!("logit of image {bad}")));
    }
    let probs: Vec<T> = logits.into_iter().map(sigmoid).collect();

    let cache = stats.map(|bn| Cache {
        x: batch.to_vec(),
        x_dims,
        z1,
        c1_dims,
        bn,
        pool_arg,
        pooled,
        p_dims,
        z2,
        mask1,
        mask2,
        flat,
        probs: probs.clone(),
    });
    Ok((probs, cache))
}

/// Gradients of the mean binary cross-entropy of a train-mode forward pass.
pub fn backward<T: Real>(params: &ModelParams<T>, cache: &Cache<T>, labels: &[u8]) -> Result<Gradients<T>> {
    let n = cache.x_dims.n;
    if labels.len() != n {
        return Err(CnnError::Shape(format!("{} labels for {n} images", labels.len())));
    }
    let t = &params.tensors;
    let act = params.arch.activation;
    let scale = T::one() / T::of_usize(n);
    // sigmoid followed by cross-entropy: dL/dlogit = (p - y) / n
    let dlogit: Vec<T> = cache
        .probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - T::of(f64::from(y))) * scale)
        .collect();
    let d = cache.flat.len() / n;
    let (dflat, dw_dense, db_dense) = dense_backward(&cache.flat, d, &t[8], &dlogit);
    let dd1 = apply_mask(&dflat, &cache.mask2);
    let da2 = apply_mask(&dd1, &cache.mask1);
    let dz2 = activation_backward(act, &cache.z2, &da2);
    let (dpooled, dw2, db2) = conv2d_backward(&cache.pooled, cache.p_dims, &t[6], KERNEL, FILTERS, &dz2);
    let dbn = maxpool_backward(&dpooled, &cache.pool_arg, cache.c1_dims.len());
    let (da1, dgamma, dbeta) = batchnorm_backward(&dbn, FILTERS, &cache.bn, &t[2]);
    let dz1 = activation_backward(act, &cache.z1, &da1);
    let (_, dw1, db1) = conv2d_backward(&cache.x, cache.x_dims, &t[0], KERNEL, FILTERS, &dz1);
    Ok(Gradients {
        tensors: [dw1, db1, dgamma, dbeta, dw2, db2, dw_dense, vec![db_dense]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::layers::loss_bce;

    fn arch(h: usize, w: usize, c: usize, act: Activation, dropout: f64) -> Architecture {
        Architecture::new(InputShape::new(h, w, c), act, dropout).unwrap()
    }

    #[test]
    fn default_head_layer_table() {
        let r = param_count(InputShape::new(28, 28, 1)).unwrap();
        let counts: Vec<usize> = r.layers.iter().map(|l| l.params).collect();
        assert_eq!(counts, vec![320, 256, 0, 16448, 0, 0, 0, 9217]);
        let shapes: Vec<Vec<usize>> = r.layers.iter().map(|l| l.output_shape.clone()).collect();
        assert_eq!(
            shapes,
            vec![
                vec![27, 27, 64],
                vec![27, 27, 64],
                vec![13, 13, 64],
                vec![12, 12, 64],
                vec![12, 12, 64],
                vec![9216],
                vec![9216],
                vec![1]
            ]
        );
        assert_eq!(r.total, 26_241);
        assert_eq!(param_count(InputShape::new(14, 14, 4)).unwrap().layers[0].params, 1088);
    }

    #[test]
    fn shape_errors() {
        assert!(param_count(InputShape::new(4, 4, 1)).is_err());
        assert!(param_count(InputShape::new(5, 5, 0)).is_err());
        assert!(param_count(InputShape::new(5, 5, 1)).is_ok());
        assert!(Architecture::new(InputShape::new(9, 9, 1), Activation::Relu, 1.0).is_err());
        let p = ModelParams::<f64>::zeros(arch(6, 6, 2, Activation::Relu, 0.0));
        assert!(matches!(
            forward(&p, &[0.0; 10], 1, Mode::Infer, 0),
            Err(CnnError::Shape(_))
        ));
    }

    #[test]
    fn zero_model_predicts_one_half() {
        for mode in [Mode::Train, Mode::Infer] {
            let p = ModelParams::<f64>::zeros(arch(9, 9, 3, Activation::Gelu, 0.5));
            let x: Vec<f64> = (0..2 * 243).map(|k| (k as f64 * 0.37).sin()).collect();
            let (probs, _) = forward(&p, &x, 2, mode, 1).unwrap();
            assert_eq!(probs, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn trainable_count_matches_report() {
        let a = arch(14, 14, 4, Activation::Relu, 0.5);
        let p = ModelParams::<f64>::init(a, 3);
        // the report counts the two running statistics as well
        assert_eq!(p.trainable_count() + 2 * FILTERS, a.param_report().total);
    }

    #[test]
    fn zero_dropout_train_equals_infer_on_batch_statistics() {
        let mut p = ModelParams::<f64>::init(arch(7, 7, 2, Activation::Relu, 0.0), 5);
        let x: Vec<f64> = (0..3 * 98).map(|k| (k as f64 * 0.91).cos()).collect();
        let (train, cache) = forward(&p, &x, 3, Mode::Train, 9).unwrap();
        let cache = cache.unwrap();
        p.tensors[4] = cache.bn.mean.clone();
        p.tensors[5] = cache.bn.var.clone();
        let (infer, none) = forward(&p, &x, 3, Mode::Infer, 9).unwrap();
        assert!(none.is_none());
        for (a, b) in train.iter().zip(&infer) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_gradients() {
        let p = ModelParams::<f64>::init(arch(6, 6, 2, Activation::Gelu, 0.0), 11);
        let (_, cache) = forward(&p, &[0.0; 2 * 72], 2, Mode::Train, 0).unwrap();
        let cache = cache.unwrap();
        let g = backward(&p, &cache, &[1, 0]).unwrap();
        assert!(g.tensors[0].iter().all(|&v| v == 0.0));
        // batch norm removes any per-channel shift of its input, so the first
        // bias only receives round-off
        assert!(g.tensors[1].iter().all(|v| v.abs() < 1e-12));
        assert!(g.tensors[3].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn duplicated_batch_gives_same_gradients() {
        let p = ModelParams::<f64>::init(arch(6, 6, 2, Activation::Relu, 0.0), 13);
        let x: Vec<f64> = (0..3 * 72).map(|k| ((k * 7 % 13) as f64 - 6.0) / 5.0).collect();
        let labels = [1, 0, 1];
        let (_, c1) = forward(&p, &x, 3, Mode::Train, 0).unwrap();
        let g1 = backward(&p, &c1.unwrap(), &labels).unwrap();
        let x2 = [x.clone(), x].concat();
        let (_, c2) = forward(&p, &x2, 6, Mode::Train, 0).unwrap();
        let g2 = backward(&p, &c2.unwrap(), &[labels, labels].concat()).unwrap();
        for (a, b) in g1.tensors.iter().zip(&g2.tensors) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn model_gradient_matches_finite_differences() {
        for act in [Activation::Relu, Activation::Gelu] {
            let mut p = ModelParams::<f64>::init(arch(6, 6, 2, act, 0.3), 17);
            // nonzero biases and batch-norm parameters
            for (i, v) in p.tensors[1].iter_mut().enumerate() {
                *v = 0.01 * (i as f64).sin();
            }
            for (i, v) in p.tensors[2].iter_mut().enumerate() {
                *v = 1.0 + 0.2 * (i as f64).cos();
            }
            let x: Vec<f64> = (0..4 * 72).map(|k| ((k as f64) * 0.618).sin()).collect();
            let labels = [1, 0, 0, 1];
            let loss = |p: &ModelParams<f64>| {
                let (probs, _) = forward(p, &x, 4, Mode::Train, 21).unwrap();
                loss_bce(&probs, &labels)
            };
            let (_, cache) = forward(&p, &x, 4, Mode::Train, 21).unwrap();
            let g = backward(&p, &cache.unwrap(), &labels).unwrap();
            let h = 1e-5;
            for (slot, &ti) in TRAINABLE.iter().enumerate() {
                for k in (0..p.tensors[ti].len()).step_by(p.tensors[ti].len() / 7 + 1) {
                    let orig = p.tensors[ti][k];
                    p.tensors[ti][k] = orig + h;
                    let up = loss(&p);
                    p.tensors[ti][k] = orig - h;
                    let down = loss(&p);
                    p.tensors[ti][k] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let an = g.tensors[slot][k];
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                    assert!(
                        rel < 1e-6,
                        "{act} tensor {} [{k}]: fd {fd} analytic {an}",
                        TENSOR_NAMES[ti]
                    );
                }
            }
        }
    }
}
