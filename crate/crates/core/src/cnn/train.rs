use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{loss_bce, Activation};
use super::model::{backward, forward, Architecture, InputShape, Mode, ModelParams, BN_MOMENTUM};
use super::optim::Adam;
use super::{CnnError, Result};
use crate::evalio::LabeledScores;
use crate::quanvolve::FeatureSet;
use crate::rng::{stream, STREAM_DROPOUT, STREAM_SHUFFLE, STREAM_SPLIT};
use crate::scalar::Real;

/// Optimiser and regularisation settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub activation: Activation,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Restarts per grid cell.
    pub repeats: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            dropout: 0.55,
            activation: Activation::Relu,
            batch_size: 32,
            epochs: 100,
            patience: 15,
            seed: 0,
            repeats: 30,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CnnError::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.learning_rate) {
            return bad(format!("learning rate {} outside [0, 1)", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.repeats == 0 {
            return bad("epochs, batch size and repeats must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss in train mode.
    pub train_loss: f64,
    /// Inference-mode accuracy on the training split after the epoch.
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_auc: f64,
    pub val_acc: f64,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_auc,val_acc";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.train_loss, self.train_acc, self.val_loss, self.val_auc, self.val_acc
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best validation AUC.
    pub params: ModelParams<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_auc: f64,
}

/// Threshold-0.5 accuracy, AUC and loss of one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    pub loss: f64,
    /// `None` when the split holds a single class.
    pub auc: Option<f64>,
    pub acc: f64,
}

const EVAL_CHUNK: usize = 256;

fn gather<T: Real>(set: &FeatureSet, indices: &[usize]) -> Vec<T> {
    let mut out = Vec::with_capacity(indices.len() * set.image_len());
    for &i in indices {
        out.extend(set.image(i).iter().map(|&v| T::of(f64::from(v))));
    }
    out
}

pub fn input_shape(set: &FeatureSet) -> InputShape {
    InputShape::new(set.height, set.width, set.channels)
}

/// Inference-mode probabilities for every image in `set`.
pub fn predict<T: Real>(params: &ModelParams<T>, set: &FeatureSet) -> Result<Vec<f64>> {
    if input_shape(set) != params.arch.input {
        return Err(CnnError::Shape(format!(
            "features are {:?}, model expects {:?}",
            input_shape(set),
            params.arch.input
        )));
    }
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (probs, _) = forward(params, &gather::<T>(set, chunk), chunk.len(), Mode::Infer, 0)?;
        out.extend(probs.into_iter().map(|p| p.to_f64_lossy()));
    }
    Ok(out)
}

pub fn metrics_of(probs: &[f64], labels: &[u8]) -> Result<Metrics> {
    if probs.is_empty() {
        return Err(CnnError::EmptySplit("evaluation".into()));
    }
    let scores = LabeledScores::new(probs.to_vec(), labels.to_vec())?;
    Ok(Metrics {
        count: probs.len(),
        loss: loss_bce(probs, labels),
        auc: scores.auc().ok(),
        acc: scores.accuracy(0.5)?,
    })
}

pub fn evaluate<T: Real>(params: &ModelParams<T>, set: &FeatureSet) -> Result<Metrics> {
    metrics_of(&predict(params, set)?, &set.labels)
}

/// Minibatch Adam on `train`, scoring the validation split after every epoch.
/// An epoch improves on the best so far when its validation AUC is higher,
/// or equal with a lower validation loss. Stops after `patience` epochs
/// without improvement and returns the best parameters seen. All randomness
/// comes from `cfg.seed`.
pub fn train<T: Real>(train: &FeatureSet, val: &FeatureSet, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(CnnError::EmptySplit("train".into()));
    }
    if val.is_empty() {
        return Err(CnnError::EmptySplit("val".into()));
    }
    let arch = Architecture::new(input_shape(train), cfg.activation, cfg.dropout)?;
    if input_shape(val) != arch.input {
        return Err(CnnError::Shape("train and val feature shapes differ".into()));
    }
    if val.labels.iter().all(|&l| l == val.labels[0]) {
        return Err(CnnError::InvalidConfig("validation split needs both classes".into()));
    }

    let mut params = ModelParams::<T>::init(arch, cfg.seed);
    let mut adam = Adam::new(&params);
    let lr = T::of(cfg.learning_rate);
    let momentum = T::of(BN_MOMENTUM);
    let mut shuffle = stream(cfg.seed, STREAM_SHUFFLE);
    let mut dropout = stream(cfg.seed, STREAM_DROPOUT);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = Vec::new();
    let mut best = (params.clone(), 0usize, f64::NEG_INFINITY, f64::INFINITY);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = gather::<T>(train, batch);
            let labels: Vec<u8> = batch.iter().map(|&i| train.labels[i]).collect();
            let (probs, cache) = forward(&params, &x, batch.len(), Mode::Train, dropout.random())?;
            let cache = cache.expect("train mode caches");
            loss_sum += loss_bce(&probs, &labels).to_f64_lossy() * batch.len() as f64;
            let grads = backward(&params, &cache, &labels)?;
            adam.step(&mut params, &grads, lr);
            params.update_running_stats(&cache, momentum);
            if !params.is_finite() {
                return Err(CnnError::NonFiniteActivation(format!("parameters after epoch {epoch}")));
            }
        }
        let train_m = evaluate(&params, train)?;
        let val_m = evaluate(&params, val)?;
        let val_auc = val_m.auc.expect("validation has both classes");
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: train_m.acc,
            val_loss: val_m.loss,
            val_auc,
            val_acc: val_m.acc,
        });
        if val_auc > best.2 || (val_auc == best.2 && val_m.loss < best.3) {
            best = (params.clone(), epoch, val_auc, val_m.loss);
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.0,
        history,
        best_epoch: best.1,
        best_val_auc: best.2,
    })
}

/// Train, validation and optional test partitions of one feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: FeatureSet,
    pub val: FeatureSet,
    pub test: Option<FeatureSet>,
}

/// Per-class seeded partition. From each class, `round(test * count)` images
/// go to test and `round(val * count)` to validation; the rest train. Every
/// partition keeps the original image order.
pub fn stratified_split(set: &FeatureSet, val: f64, test: f64, seed: u64) -> Result<Splits> {
    if !(val > 0.0 && test >= 0.0 && val + test < 1.0) {
        return Err(CnnError::InvalidConfig(format!(
            "split fractions val={val} test={test}"
        )));
    }
    let mut rng = stream(seed, STREAM_SPLIT);
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_test = (test * n).round() as usize;
        let n_val = (val * n).round() as usize;
        te.extend_from_slice(&idx[..n_test]);
        va.extend_from_slice(&idx[n_test..n_test + n_val]);
        tr.extend_from_slice(&idx[n_test + n_val..]);
    }
    for part in [&mut tr, &mut va, &mut te] {
        part.sort_unstable();
    }
    if tr.is_empty() || va.is_empty() {
        return Err(CnnError::EmptySplit(if tr.is_empty() { "train" } else { "val" }.into()));
    }
    Ok(Splits {
        train: set.select(&tr),
        val: set.select(&va),
        test: (test > 0.0).then(|| set.select(&te)),
    })
}
