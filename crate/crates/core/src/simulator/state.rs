use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::scalar::Real;

/// Largest register the dense representation accepts.
pub const MAX_QUBITS: usize = 12;

/// Rotation axis for global single-qubit rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Dense amplitude vector over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector<T: Real> {
    n_qubits: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> Statevector<T> {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be `2^n_qubits`; the norm is not
    /// checked.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex<T>>) -> Result<Self> {
        check_size(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(SimError::ShapeMismatch {
                expected: 1 << n_qubits,
                found: amps.len(),
            });
        }
        Ok(Self { n_qubits, amps })
    }

    /// Angle embedding of a flattened patch: qubit `i` is prepared in
    /// `H Ry(phi_i) |0>`, i.e. `[(cos(phi/2) + sin(phi/2)), (sin(phi/2) - cos(phi/2))] / sqrt(2)`,
    /// and the register is the tensor product over qubits.
    pub fn encoded(phis: &[T]) -> Result<Self> {
        let len = phis.len();
        let side = (1..=3).find(|s| s * s == len);
        if side.is_none() || len > MAX_QUBITS {
            return Err(SimError::SizeError { len });
        }
        for (index, &phi) in phis.iter().enumerate() {
            if !phi.is_finite() {
                return Err(SimError::NonFinite("encoding angle"));
            }
            if phi < T::zero() || phi > T::PI() {
                return Err(SimError::AngleOutOfRange {
                    index,
                    value: phi.to_f64_lossy(),
                });
            }
        }

        let inv_sqrt2 = T::FRAC_1_SQRT_2();
        let mut amps = Vec::with_capacity(1 << len);
        amps.push(Complex::new(T::one(), T::zero()));
        for &phi in phis {
            let half = phi / T::of(2.0);
            let (s, c) = half.sin_cos();
            let up = (c + s) * inv_sqrt2;
            let down = (s - c) * inv_sqrt2;
            // qubit i is bit i, so the new qubit becomes the highest bit so far
            let lower = amps.len();
            amps.extend_from_within(..);
            for a in &mut amps[..lower] {
                *a = a.scale(up);
            }
            for a in &mut amps[lower..] {
                *a = a.scale(down);
            }
        }
        Ok(Self { n_qubits: len, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.n_qubits, other.n_qubits, "register size mismatch");
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// Euclidean distance between amplitude vectors (phase sensitive).
    pub fn distance(&self, other: &Self) -> T {
        assert_eq!(self.n_qubits, other.n_qubits, "register size mismatch");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// Applies `exp(-i theta/2 sigma_axis)` to every qubit.
    pub fn apply_global_rotation(&mut self, axis: Axis, theta: T) -> Result<()> {
        if !theta.is_finite() {
            return Err(SimError::NonFinite("rotation angle"));
        }
        if theta == T::zero() {
            return Ok(());
        }
        let (s, c) = (theta / T::of(2.0)).sin_cos();
        for q in 0..self.n_qubits {
            self.rotate_qubit(q, axis, c, s);
        }
        Ok(())
    }

    /// Rotation of a single qubit, given `cos(theta/2)` and `sin(theta/2)`.
    pub(crate) fn rotate_qubit(&mut self, qubit: usize, axis: Axis, c: T, s: T) {
        let stride = 1usize << qubit;
        let zero = T::zero();
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                match axis {
                    Axis::X => {
                        // [[c, -is], [-is, c]]
                        let mis = Complex::new(zero, -s);
                        *a0 = x0.scale(c) + mis * x1;
                        *a1 = mis * x0 + x1.scale(c);
                    }
                    Axis::Y => {
                        // [[c, -s], [s, c]]
                        *a0 = x0.scale(c) - x1.scale(s);
                        *a1 = x0.scale(s) + x1.scale(c);
                    }
                }
            }
        }
    }

    /// `<sigma_z>` on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> Result<T> {
        if qubit >= self.n_qubits {
            return Err(SimError::IndexOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = 1usize << qubit;
        let mut acc = T::zero();
        for (b, a) in self.amps.iter().enumerate() {
            if b & mask == 0 {
                acc += a.norm_sqr();
            } else {
                acc -= a.norm_sqr();
            }
        }
        Ok(acc)
    }

    /// `<sigma_z>` on every qubit in one pass over the amplitudes.
    pub fn expectations_z(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_qubits];
        for (b, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if b >> q & 1 == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }
}

fn check_size(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(SimError::SizeError { len: 0 });
    }
    if n_qubits > MAX_QUBITS {
        return Err(SimError::TooManyQubits {
            n_qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}
