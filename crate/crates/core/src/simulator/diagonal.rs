use super::{Result, SimError, MAX_QUBITS};
use crate::scalar::Real;

/// Symmetric pairwise interaction matrix `J_ij`, zero on the diagonal.
/// Non-zero entries define the interacting pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings<T: Real> {
    n: usize,
    values: Vec<T>,
}

impl<T: Real> Couplings<T> {
    /// Row-major `n x n` matrix.
    pub fn new(n: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n * n {
            return Err(SimError::ShapeMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != T::zero() {
                return Err(SimError::InvalidCouplings(format!("J[{i}][{i}] is not zero")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() {
                    return Err(SimError::InvalidCouplings(format!("J[{i}][{j}] is not finite")));
                }
                if v != values[j * n + i] {
                    return Err(SimError::InvalidCouplings(format!("J[{i}][{j}] != J[{j}][{i}]")));
                }
            }
        }
        Ok(Self { n, values })
    }

    /// All-zero couplings on `n` qubits.
    pub fn none(n: usize) -> Self {
        Self {
            n,
            values: vec![T::zero(); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// Interacting pairs `(i, j, J_ij)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let v = self.get(i, j);
                (v != T::zero()).then_some((i, j, v))
            })
        })
    }
}

/// Diagonal of the Ising/detuning part of the Hamiltonian at one detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEnergies<T: Real> {
    pub values: Vec<T>,
}

/// Detuning-independent pieces of the diagonal, precomputed once per
/// coupling matrix: `E(b, delta) = interaction[b] - delta * occupation[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingDiagonal<T: Real> {
    n_qubits: usize,
    interaction: Vec<T>,
    occupation: Vec<T>,
}

impl<T: Real> IsingDiagonal<T> {
    pub fn new(n_qubits: usize, couplings: &Couplings<T>) -> Result<Self> {
        if couplings.n() != n_qubits {
            return Err(SimError::ShapeMismatch {
                expected: n_qubits,
                found: couplings.n(),
            });
        }
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits {
                n_qubits,
                max: MAX_QUBITS,
            });
        }
        let pairs: Vec<_> = couplings.pairs().collect();
        let dim = 1usize << n_qubits;
        let mut interaction = Vec::with_capacity(dim);
        let mut occupation = Vec::with_capacity(dim);
        for b in 0..dim {
            let mut e = T::zero();
            for &(i, j, v) in &pairs {
                if b >> i & 1 == 1 && b >> j & 1 == 1 {
                    e += v;
                }
            }
            interaction.push(e);
            occupation.push(T::of_usize(b.count_ones() as usize));
        }
        Ok(Self {
            n_qubits,
            interaction,
            occupation,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn energy(&self, basis: usize, delta: T) -> T {
        self.interaction[basis] - delta * self.occupation[basis]
    }

    pub fn at(&self, delta: T) -> DiagonalEnergies<T> {
        DiagonalEnergies {
            values: (0..self.interaction.len()).map(|b| self.energy(b, delta)).collect(),
        }
    }
}

/// Per-basis-state energy `sum_{i<j} J_ij b_i b_j - delta * sum_i b_i`.
pub fn build_diagonal<T: Real>(n_qubits: usize, couplings: &Couplings<T>, delta: T) -> Result<DiagonalEnergies<T>> {
    Ok(IsingDiagonal::new(n_qubits, couplings)?.at(delta))
}
