//! Classical head trained on feature maps.
//!
//! The network is fixed: two 2x2 convolutions of 64 filters around batch
//! normalisation and 2x2 max pooling, two dropouts, and one sigmoid unit.
//! Only the input shape varies, so the same head trains on raw images and on
//! quantum feature maps of any channel count. Gradients are written out by
//! hand and checked against central differences.

mod checkpoint;
mod grid;
pub mod layers;
mod model;
mod optim;
mod train;

pub use checkpoint::{from_bytes, load_model, save_model, to_bytes, MODEL_MAGIC, MODEL_VERSION};
pub use grid::{
    grid_search, repeat_seed, row_config, CellSummary, Grid, GridResult, GridRow, Quartiles, GRID_HEADER,
    SUMMARY_HEADER,
};
pub use layers::Activation;
pub use model::{
    backward, forward, param_count, Architecture, Cache, Gradients, InputShape, LayerInfo, Mode, ModelParams,
    ParamReport, BN_EPS, BN_MOMENTUM, FILTERS, KERNEL, TENSOR_NAMES, TRAINABLE,
};
pub use optim::Adam;
pub use train::{
    evaluate, input_shape, metrics_of, predict, stratified_split, train, EpochRecord, Metrics, Splits, TrainConfig,
    TrainOutcome, HISTORY_HEADER,
};

use thiserror::Error;

use crate::evalio::EvalError;
use crate::quanvolve::QuanvolveError;

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFiniteActivation(String),
    #[error("{0} split is empty")]
    EmptySplit(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Features(#[from] QuanvolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CnnError> = std::result::Result<T, E>;
