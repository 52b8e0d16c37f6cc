//! Digital-analog quantum kernels over `n x n` pixel patches.
//!
//! A kernel encodes the patch angles, runs the analog block once per
//! connectivity graph, applies a global `Ry(theta0)` and reads out `<Z_i>` on
//! every qubit. Multi-graph kernels concatenate the per-graph readouts
//! graph-major, so output `m * n^2 + i` is qubit `i` under graph `m`.

mod graph;
mod sensitivity;
mod spec;

pub use graph::{grid_positions, make_graph, Graph, GraphKind};
pub use sensitivity::{sensitivity_matrix, SensitivityMatrix, DEFAULT_FD_STEP};
pub use spec::{coupling_matrix, CouplingModel, Kernel, KernelSpec};

use thiserror::Error;

use crate::simulator::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("unknown graph name {0:?}")]
    UnknownGraphName(String),
    #[error("invalid edge ({a}, {b}) for a {qubits}-qubit patch")]
    InvalidEdge { a: usize, b: usize, qubits: usize },
    #[error("unsupported patch side {0}")]
    InvalidSize(usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("kernel needs at least one graph")]
    NoGraphs,
    #[error("graph {index} has side {found}, kernel side is {expected}")]
    GraphSizeMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("single-graph evaluation requested on a kernel with {0} graphs")]
    NotSingleGraph(usize),
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("finite-difference step {0} must be positive and below pi/4")]
    StepTooLarge(f64),
    #[error("base angle {value} at {index} is not inside (h, pi - h)")]
    BaseOutOfRange { index: usize, value: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T, E = KernelError> = std::result::Result<T, E>;

/// Single-graph kernel output: `<Z_i>` for each qubit of the patch.
pub fn daqk_eval(patch_phis: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    if spec.graphs.len() != 1 {
        return Err(KernelError::NotSingleGraph(spec.graphs.len()));
    }
    spec.compile::<f64>()?.eval(patch_phis)
}

/// Multi-graph kernel output, `M * n^2` values, graph-major.
pub fn multi_daqk_eval(patch_phis: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    spec.compile::<f64>()?.eval(patch_phis)
}
