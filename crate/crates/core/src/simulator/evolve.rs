use num_complex::Complex;

use super::{Axis, Couplings, IsingDiagonal, Result, Schedule, SimError, Statevector};
use crate::scalar::Real;

#[derive(Debug, Clone)]
struct Step<T: Real> {
    /// `cos` and `sin` of half the x-rotation angle `dt * Omega(t_k)`.
    half_cos: T,
    half_sin: T,
    /// `exp(-i dt E_k(b))` for every basis state.
    phases: Vec<Complex<T>>,
}

/// First-order product formula for the analog block, precomputed for a fixed
/// schedule, duration and coupling matrix.
///
/// Step `k` samples the schedule at its midpoint `t_k = (k + 1/2) * tau / steps`
/// and applies the global x-rotation `exp(-i dt Omega(t_k)/2 sum X)` followed by
/// the diagonal phase `exp(-i dt E(b; delta(t_k)))`.
#[derive(Debug, Clone)]
pub struct TrotterPlan<T: Real> {
    n_qubits: usize,
    steps: Vec<Step<T>>,
}

impl<T: Real> TrotterPlan<T> {
    pub fn new(diagonal: &IsingDiagonal<T>, schedule: &Schedule, tau: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(SimError::InvalidSteps(steps));
        }
        if !tau.is_finite() || tau < T::zero() {
            return Err(SimError::InvalidDuration(tau.to_f64_lossy()));
        }
        schedule.validate()?;

        let dt = tau / T::of_usize(steps);
        let half = T::of(0.5);
        let dim = 1usize << diagonal.n_qubits();
        let plan = (0..steps)
            .map(|k| {
                let t = (T::of_usize(k) + half) * dt;
                let (omega, delta) = schedule.sample(t);
                let (half_sin, half_cos) = (dt * omega * half).sin_cos();
                let phases = (0..dim)
                    .map(|b| {
                        let (s, c) = (-(dt * diagonal.energy(b, delta))).sin_cos();
                        Complex::new(c, s)
                    })
                    .collect();
                Step {
                    half_cos,
                    half_sin,
                    phases,
                }
            })
            .collect();
        Ok(Self {
            n_qubits: diagonal.n_qubits(),
            steps: plan,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn apply(&self, state: &mut Statevector<T>) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(SimError::ShapeMismatch {
                expected: self.n_qubits,
                found: state.n_qubits(),
            });
        }
        for step in &self.steps {
            if step.half_sin != T::zero() {
                for q in 0..self.n_qubits {
                    state.rotate_qubit(q, Axis::X, step.half_cos, step.half_sin);
                }
            }
            for (a, p) in state.amplitudes_mut().iter_mut().zip(&step.phases) {
                *a = *a * p;
            }
        }
        Ok(())
    }
}

/// Evolves `state` through the analog block for time `tau` using `steps`
/// first-order trotter steps.
pub fn trotter_evolve<T: Real>(
    state: &mut Statevector<T>,
    schedule: &Schedule,
    tau: T,
    steps: usize,
    couplings: &Couplings<T>,
) -> Result<()> {
    let diagonal = IsingDiagonal::new(state.n_qubits(), couplings)?;
    TrotterPlan::new(&diagonal, schedule, tau, steps)?.apply(state)
}
