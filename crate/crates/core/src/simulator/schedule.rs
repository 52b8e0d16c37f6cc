use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::scalar::Real;

/// Time dependence of the Rabi amplitude `Omega(t)` and detuning `delta(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `Omega(t) = delta(t) = t`.
    #[default]
    Linear,
    /// Time-independent coefficients.
    Constant { omega: f64, delta: f64 },
    /// Linear interpolation between `[t, value]` breakpoints, held constant
    /// outside the breakpoint range.
    PiecewiseLinear { omega: Vec<[f64; 2]>, delta: Vec<[f64; 2]> },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Linear => Ok(()),
            Schedule::Constant { omega, delta } => {
                if omega.is_finite() && delta.is_finite() {
                    Ok(())
                } else {
                    Err(SimError::InvalidSchedule("non-finite constant".into()))
                }
            }
            Schedule::PiecewiseLinear { omega, delta } => {
                check_breakpoints("omega", omega)?;
                check_breakpoints("delta", delta)
            }
        }
    }

    /// `(Omega(t), delta(t))`.
    pub fn sample<T: Real>(&self, t: T) -> (T, T) {
        match self {
            Schedule::Linear => (t, t),
            Schedule::Constant { omega, delta } => (T::of(*omega), T::of(*delta)),
            Schedule::PiecewiseLinear { omega, delta } => {
                let tf = t.to_f64_lossy();
                (T::of(interpolate(omega, tf)), T::of(interpolate(delta, tf)))
            }
        }
    }
}

fn check_breakpoints(name: &str, points: &[[f64; 2]]) -> Result<()> {
    if points.is_empty() {
        return Err(SimError::InvalidSchedule(format!("{name} has no breakpoints")));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidSchedule(format!("{name} has a non-finite breakpoint")));
    }
    if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(SimError::InvalidSchedule(format!(
            "{name} breakpoints must have strictly increasing times"
        )));
    }
    Ok(())
}

fn interpolate(points: &[[f64; 2]], t: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first[0] {
        return first[1];
    }
    if t >= last[0] {
        return last[1];
    }
    let k = points.partition_point(|p| p[0] <= t);
    let [t0, v0] = points[k - 1];
    let [t1, v1] = points[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_exactly_t() {
        for t in [0.0, 0.025, 0.075, 0.125, 0.175, 0.2, 1.0 / 3.0] {
            assert_eq!(Schedule::Linear.sample(t), (t, t));
        }
        assert_eq!(Schedule::Linear.sample(0.3f32), (0.3f32, 0.3f32));
    }

    #[test]
    fn piecewise_interpolates_and_clamps() {
        let s = Schedule::PiecewiseLinear {
            omega: vec![[0.0, 0.0], [1.0, 2.0], [2.0, 2.0]],
            delta: vec![[0.5, -1.0]],
        };
        s.validate().unwrap();
        assert_eq!(s.sample(-1.0), (0.0, -1.0));
        assert_eq!(s.sample(0.5), (1.0, -1.0));
        assert_eq!(s.sample(1.5), (2.0, -1.0));
        assert_eq!(s.sample(9.0), (2.0, -1.0));
    }

    #[test]
    fn validation() {
        let bad = Schedule::PiecewiseLinear {
            omega: vec![[0.0, 0.0], [0.0, 1.0]],
            delta: vec![[0.0, 0.0]],
        };
        assert!(bad.validate().is_err());
        let empty = Schedule::PiecewiseLinear {
            omega: vec![],
            delta: vec![[0.0, 0.0]],
        };
        assert!(empty.validate().is_err());
        assert!(Schedule::Constant {
            omega: f64::NAN,
            delta: 0.0
        }
        .validate()
        .is_err());
        assert!(Schedule::Constant { omega: 1.0, delta: 0.0 }.validate().is_ok());
    }

    #[test]
    fn serde_form() {
        let s: Schedule = serde_json::from_str(r#"{"kind":"linear"}"#).unwrap();
        assert_eq!(s, Schedule::Linear);
        let s: Schedule = serde_json::from_str(r#"{"kind":"constant","omega":1.0,"delta":0.5}"#).unwrap();
        assert_eq!(s, Schedule::Constant { omega: 1.0, delta: 0.5 });
    }
}
