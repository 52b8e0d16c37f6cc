use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use super::{Couplings, IsingDiagonal, Result, Schedule, SimError, Statevector};
use crate::scalar::Real;

/// Dense `2^n x 2^n` matrices stop being practical beyond this.
pub const ORACLE_MAX_QUBITS: usize = 10;

/// Reference integrator for the analog block: for each of `substeps` slices
/// the full Hamiltonian is assembled at the slice midpoint and applied through
/// its eigendecomposition, `exp(-i H dt) = V exp(-i Lambda dt) V^T`.
///
/// Computation runs in `f64` regardless of `T`. The Hamiltonian is real
/// symmetric in the computational basis, so a real symmetric eigensolver is
/// sufficient.
pub fn exact_evolve_oracle<T: Real>(
    state: &Statevector<T>,
    schedule: &Schedule,
    tau: f64,
    substeps: usize,
    couplings: &Couplings<T>,
) -> Result<Statevector<T>> {
    let mut out = exact_evolve_oracle_batch(std::slice::from_ref(state), schedule, tau, substeps, couplings)?;
    Ok(out.remove(0))
}

/// [`exact_evolve_oracle`] for several states sharing one register size; each
/// slice is diagonalised once for the whole batch.
pub fn exact_evolve_oracle_batch<T: Real>(
    states: &[Statevector<T>],
    schedule: &Schedule,
    tau: f64,
    substeps: usize,
    couplings: &Couplings<T>,
) -> Result<Vec<Statevector<T>>> {
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let n = first.n_qubits();
    if n > ORACLE_MAX_QUBITS {
        return Err(SimError::TooManyQubits {
            n_qubits: n,
            max: ORACLE_MAX_QUBITS,
        });
    }
    if let Some(s) = states.iter().find(|s| s.n_qubits() != n) {
        return Err(SimError::ShapeMismatch {
            expected: n,
            found: s.n_qubits(),
        });
    }
    if substeps == 0 {
        return Err(SimError::InvalidSteps(substeps));
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(SimError::InvalidDuration(tau));
    }
    schedule.validate()?;

    let couplings64 = Couplings::new(
        couplings.n(),
        couplings.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
    )?;
    let diagonal = IsingDiagonal::new(n, &couplings64)?;
    let dim = 1usize << n;
    let cols = states.len();
    let column = |part: fn(&Complex<T>) -> T| {
        DMatrix::from_fn(dim, cols, |b, k| part(&states[k].amplitudes()[b]).to_f64_lossy())
    };
    let mut re = column(|a| a.re);
    let mut im = column(|a| a.im);

    let dt = tau / substeps as f64;
    if dt > 0.0 {
        for k in 0..substeps {
            let t = (k as f64 + 0.5) * dt;
            let (omega, delta) = schedule.sample(t);
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            for b in 0..dim {
                h[(b, b)] = diagonal.energy(b, delta);
                for q in 0..n {
                    h[(b, b ^ (1 << q))] += omega / 2.0;
                }
            }
            let eig = SymmetricEigen::new(h);
            let v = &eig.eigenvectors;
            let mut c_re = v.tr_mul(&re);
            let mut c_im = v.tr_mul(&im);
            for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
                let (s, c) = (-lambda * dt).sin_cos();
                for j in 0..cols {
                    let (a, b) = (c_re[(i, j)], c_im[(i, j)]);
                    c_re[(i, j)] = c * a - s * b;
                    c_im[(i, j)] = s * a + c * b;
                }
            }
            re = v * c_re;
            im = v * c_im;
        }
    }

    (0..cols)
        .map(|j| {
            let amps = (0..dim)
                .map(|b| Complex::new(T::of(re[(b, j)]), T::of(im[(b, j)])))
                .collect();
            Statevector::from_amplitudes(n, amps)
        })
        .collect()
}
