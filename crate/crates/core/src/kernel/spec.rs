use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Graph, KernelError, Result};
use crate::scalar::Real;
use crate::simulator::{Axis, Couplings, IsingDiagonal, Schedule, Statevector, TrotterPlan};

/// How pair interactions are derived from a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CouplingModel {
    /// `J_ij = C6 / r_ij^6` on the graph's edges.
    Geometric { c6: f64 },
    /// `J_ij = j` on the graph's edges.
    Uniform { j: f64 },
}

impl Default for CouplingModel {
    fn default() -> Self {
        CouplingModel::Geometric { c6: 1.0 }
    }
}

impl std::str::FromStr for CouplingModel {
    type Err = KernelError;

    /// `geometric:<c6>` or `uniform:<j>`; a bare model name takes value 1.
    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = s.split_once(':').unwrap_or((s, "1"));
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| KernelError::InvalidParameter(format!("coupling value in {s:?}")))?;
        match name.trim() {
            "geometric" => Ok(Self::Geometric { c6: value }),
            "uniform" => Ok(Self::Uniform { j: value }),
            other => Err(KernelError::InvalidParameter(format!("coupling model {other:?}"))),
        }
    }
}

impl CouplingModel {
    fn validate(&self) -> Result<()> {
        let v = match *self {
            CouplingModel::Geometric { c6 } => c6,
            CouplingModel::Uniform { j } => j,
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(KernelError::InvalidParameter(format!(
                "coupling strength must be positive, got {v}"
            )))
        }
    }
}

/// Symmetric interaction matrix for `graph`, non-zero only on its edges.
pub fn coupling_matrix<T: Real>(graph: &Graph, model: &CouplingModel) -> Result<Couplings<T>> {
    model.validate()?;
    let q = graph.n_qubits();
    let mut values = vec![T::zero(); q * q];
    for &(a, b) in &graph.edges {
        let j = match *model {
            CouplingModel::Geometric { c6 } => {
                let r2 = graph.distance_sq(a, b);
                if r2 <= 0.0 {
                    return Err(KernelError::InvalidGraph(format!(
                        "qubits {a} and {b} share a position"
                    )));
                }
                c6 / r2.powi(3)
            }
            CouplingModel::Uniform { j } => j,
        };
        values[a * q + b] = T::of(j);
        values[b * q + a] = T::of(j);
    }
    Ok(Couplings::new(q, values)?)
}

/// Complete, serialisable description of a (multi-)graph kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n: usize,
    pub graphs: Vec<Graph>,
    pub schedule: Schedule,
    pub tau: f64,
    pub steps: usize,
    pub theta0: f64,
    pub coupling: CouplingModel,
}

impl KernelSpec {
    /// Single-graph kernel with the default analog parameters
    /// (`tau = 0.2`, 4 steps, linear schedule, `theta0 = 0`, geometric `C6 = 1`).
    pub fn single(graph: Graph) -> Self {
        Self::multi(vec![graph])
    }

    pub fn multi(graphs: Vec<Graph>) -> Self {
        Self {
            n: graphs.first().map_or(0, |g| g.n),
            graphs,
            schedule: Schedule::Linear,
            tau: 0.2,
            steps: 4,
            theta0: 0.0,
            coupling: CouplingModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.graphs.is_empty() {
            return Err(KernelError::NoGraphs);
        }
        for (index, g) in self.graphs.iter().enumerate() {
            if g.n != self.n {
                return Err(KernelError::GraphSizeMismatch {
                    index,
                    expected: self.n,
                    found: g.n,
                });
            }
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(KernelError::InvalidParameter(format!("tau = {}", self.tau)));
        }
        if self.steps == 0 {
            return Err(KernelError::InvalidParameter("steps must be at least 1".into()));
        }
        if !self.theta0.is_finite() {
            return Err(KernelError::InvalidParameter("theta0 is not finite".into()));
        }
        self.coupling.validate()?;
        self.schedule.validate()?;
        Ok(())
    }

    /// Qubits per patch.
    pub fn n_qubits(&self) -> usize {
        self.n * self.n
    }

    /// Output channels, `M * n^2`.
    pub fn channels(&self) -> usize {
        self.graphs.len() * self.n_qubits()
    }

    /// Canonical JSON: keys sorted, no whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("KernelSpec serialises");
        value.to_string()
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Precomputes the per-graph trotter plans.
    pub fn compile<T: Real>(&self) -> Result<Kernel<T>> {
        self.validate()?;
        let plans = self
            .graphs
            .iter()
            .map(|g| {
                let couplings = coupling_matrix::<T>(g, &self.coupling)?;
                let diagonal = IsingDiagonal::new(g.n_qubits(), &couplings)?;
                Ok(TrotterPlan::new(
                    &diagonal,
                    &self.schedule,
                    T::of(self.tau),
                    self.steps,
                )?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Kernel {
            n: self.n,
            plans,
            theta0: T::of(self.theta0),
        })
    }
}

/// A compiled kernel, ready for repeated patch evaluation.
#[derive(Debug, Clone)]
pub struct Kernel<T: Real> {
    n: usize,
    plans: Vec<TrotterPlan<T>>,
    theta0: T,
}

impl<T: Real> Kernel<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_qubits(&self) -> usize {
        self.n * self.n
    }

    pub fn n_graphs(&self) -> usize {
        self.plans.len()
    }

    pub fn channels(&self) -> usize {
        self.plans.len() * self.n_qubits()
    }

    /// Final state for one graph: encode, analog block, global `Ry(theta0)`.
    pub fn evolve(&self, graph: usize, patch_phis: &[T]) -> Result<Statevector<T>> {
        if patch_phis.len() != self.n_qubits() {
            return Err(KernelError::Sim(crate::simulator::SimError::ShapeMismatch {
                expected: self.n_qubits(),
                found: patch_phis.len(),
            }));
        }
        let mut state = Statevector::encoded(patch_phis)?;
        self.plans[graph].apply(&mut state)?;
        state.apply_global_rotation(Axis::Y, self.theta0)?;
        Ok(state)
    }

    /// Writes `M * n^2` readouts into `out`.
    pub fn eval_into(&self, patch_phis: &[T], out: &mut [T]) -> Result<()> {
        let q = self.n_qubits();
        assert_eq!(out.len(), self.channels(), "output buffer size");
        for (m, chunk) in out.chunks_exact_mut(q).enumerate() {
            let state = self.evolve(m, patch_phis)?;
            chunk.copy_from_slice(&state.expectations_z());
        }
        Ok(())
    }

    pub fn eval(&self, patch_phis: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.channels()];
        self.eval_into(patch_phis, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{daqk_eval, make_graph, multi_daqk_eval, GraphKind};
    use crate::simulator::exact_evolve_oracle;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

    fn kings(n: usize) -> Graph {
        make_graph(&GraphKind::Kings, n).unwrap()
    }

    #[test]
    fn geometric_couplings() {
        let j = coupling_matrix::<f64>(&kings(2), &CouplingModel::Geometric { c6: 1.0 }).unwrap();
        assert_eq!(j.get(0, 1), 1.0);
        assert_eq!(j.get(0, 2), 1.0);
        assert_eq!(j.get(0, 3), 0.125);
        assert_eq!(j.get(1, 2), 0.125);
        let j = coupling_matrix::<f64>(&kings(3), &CouplingModel::Geometric { c6: 2.0 }).unwrap();
        assert_eq!(j.get(0, 1), 2.0);
        assert_eq!(j.get(0, 4), 0.25);
        // not an edge
        assert_eq!(j.get(0, 2), 0.0);
        assert_eq!(j.get(0, 8), 0.0);
    }

    #[test]
    fn uniform_couplings_are_adjacency() {
        let g = make_graph(&GraphKind::Ring, 3).unwrap();
        let j = coupling_matrix::<f64>(&g, &CouplingModel::Uniform { j: 1.0 }).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                assert_eq!(j.get(a, b), if g.has_edge(a, b) { 1.0 } else { 0.0 });
            }
        }
        assert!(coupling_matrix::<f64>(&g, &CouplingModel::Uniform { j: 0.0 }).is_err());
    }

    #[test]
    fn coupling_model_parsing() {
        assert_eq!(
            "geometric:2.5".parse::<CouplingModel>().unwrap(),
            CouplingModel::Geometric { c6: 2.5 }
        );
        assert_eq!(
            "uniform".parse::<CouplingModel>().unwrap(),
            CouplingModel::Uniform { j: 1.0 }
        );
        assert!("dipolar:1".parse::<CouplingModel>().is_err());
    }

    #[test]
    fn zero_time_readout_is_sine() {
        let mut spec = KernelSpec::single(kings(2));
        spec.tau = 0.0;
        let out = daqk_eval(&[0.0, FRAC_PI_6, FRAC_PI_2, PI], &spec).unwrap();
        let expected = [0.0, 0.5, 1.0, 0.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-12, "{out:?}");
        }
        let ones = daqk_eval(&[FRAC_PI_2; 4], &spec).unwrap();
        assert_eq!(ones, vec![1.0; 4]);
    }

    #[test]
    fn default_parameters_match_oracle() {
        let spec = KernelSpec::single(kings(2));
        let out = daqk_eval(&[FRAC_PI_2; 4], &spec).unwrap();

        let couplings = coupling_matrix::<f64>(&spec.graphs[0], &spec.coupling).unwrap();
        let start = Statevector::encoded(&[FRAC_PI_2; 4]).unwrap();
        let exact = exact_evolve_oracle(&start, &Schedule::Linear, 0.2, 64, &couplings).unwrap();
        let v = exact.expectation_z(0).unwrap();
        for (q, &o) in out.iter().enumerate() {
            assert!((exact.expectation_z(q).unwrap() - v).abs() < 1e-12);
            assert!((o - v).abs() < 1e-3, "{o} vs {v}");
        }
    }

    #[test]
    fn multi_graph_layout() {
        let g = kings(3);
        let spec = KernelSpec::multi(vec![
            g.clone(),
            make_graph(&GraphKind::Grid4, 3).unwrap(),
            make_graph(&GraphKind::Diag, 3).unwrap(),
            make_graph(&GraphKind::Ring, 3).unwrap(),
        ]);
        let phis = [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 0.7, 1.2];
        assert_eq!(multi_daqk_eval(&phis, &spec).unwrap().len(), 36);
        assert_eq!(daqk_eval(&phis, &spec).unwrap_err(), KernelError::NotSingleGraph(4));

        let twin = KernelSpec::multi(vec![g.clone(), g.clone()]);
        let out = multi_daqk_eval(&phis, &twin).unwrap();
        assert_eq!(out[..9], out[9..]);

        let single = KernelSpec::single(g);
        assert_eq!(
            multi_daqk_eval(&phis, &single).unwrap(),
            daqk_eval(&phis, &single).unwrap()
        );
    }

    #[test]
    fn validation_errors() {
        let mut spec = KernelSpec::multi(vec![kings(2), kings(3)]);
        assert!(matches!(
            spec.validate(),
            Err(KernelError::GraphSizeMismatch { index: 1, .. })
        ));
        spec.graphs.clear();
        assert_eq!(spec.validate(), Err(KernelError::NoGraphs));
        let mut spec = KernelSpec::single(kings(2));
        spec.steps = 0;
        assert!(spec.validate().is_err());
        let spec = KernelSpec::single(kings(2));
        assert!(spec.compile::<f64>().unwrap().eval(&[0.1; 9]).is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = KernelSpec::single(kings(2));
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.theta0 = 0.1;
        assert_ne!(a.digest(), b.digest());
        let round: KernelSpec = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(round, a);
    }

    #[test]
    fn single_precision_kernel_tracks_double() {
        let spec = KernelSpec::single(kings(3));
        let phis = [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 0.7, 1.2];
        let phis32: Vec<f32> = phis.iter().map(|&p| p as f32).collect();
        let a = spec.compile::<f64>().unwrap().eval(&phis).unwrap();
        let b = spec.compile::<f32>().unwrap().eval(&phis32).unwrap();
        for (x, y) in a.iter().zip(b) {
            assert!((x - y as f64).abs() < 1e-5);
        }
    }
}
