//! Dense state-vector simulation of the encoded patch register and its
//! analog Rydberg-Ising evolution.
//!
//! Conventions used throughout the crate:
//!
//! * `hbar = 1`, time and energies are dimensionless.
//! * Basis index `b` carries the state of qubit `i` in bit `i`. Qubit `i` is
//!   the row-major position `row * n + col` inside an `n x n` patch.
//! * The occupation operator `eta = (1 - sigma_z) / 2` has eigenvalue 1 on `|1>`.
//!
//! The analog Hamiltonian is
//! `H(t) = Omega(t)/2 * sum_j X_j - delta(t) * sum_j eta_j + sum_{i<j} J_ij eta_i eta_j`.
//! Its transverse part factorises into per-qubit x-rotations and the rest is
//! diagonal in the computational basis, which is what [`trotter_evolve`]
//! exploits. [`exact_evolve_oracle`] integrates the same Hamiltonian with dense
//! matrix exponentials and exists to validate the split evolution.

mod diagonal;
mod evolve;
mod oracle;
mod schedule;
mod state;

pub use diagonal::{build_diagonal, Couplings, DiagonalEnergies, IsingDiagonal};
pub use evolve::{trotter_evolve, TrotterPlan};
pub use oracle::{exact_evolve_oracle, exact_evolve_oracle_batch, ORACLE_MAX_QUBITS};
pub use schedule::Schedule;
pub use state::{Axis, Statevector, MAX_QUBITS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("angle {value} at position {index} is outside [0, pi]")]
    AngleOutOfRange { index: usize, value: f64 },
    #[error("{len} angles do not form a supported square patch (1, 4 or 9 qubits)")]
    SizeError { len: usize },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid coupling matrix: {0}")]
    InvalidCouplings(String),
    #[error("trotter step count must be at least 1, got {0}")]
    InvalidSteps(usize),
    #[error("evolution time must be finite and non-negative, got {0}")]
    InvalidDuration(f64),
    #[error("{n_qubits} qubits exceeds the limit of {max}")]
    TooManyQubits { n_qubits: usize, max: usize },
    #[error("qubit {index} out of range for a {n_qubits}-qubit register")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
