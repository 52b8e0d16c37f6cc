use std::f64::consts::{FRAC_PI_4, PI};

use super::{KernelError, KernelSpec, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Jacobian estimate `d<Z_i>/dphi_j`, row-major over `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub size: usize,
    pub entries: Vec<f64>,
}

impl SensitivityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    /// Largest off-diagonal magnitude.
    pub fn max_off_diagonal(&self) -> f64 {
        (0..self.size)
            .flat_map(|i| (0..self.size).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).abs())
            .fold(0.0, f64::max)
    }
}

/// Central-difference sensitivity of a single-graph kernel's readout to each
/// input angle.
pub fn sensitivity_matrix(spec: &KernelSpec, base_phis: &[f64], h: f64) -> Result<SensitivityMatrix> {
    if spec.graphs.len() != 1 {
        return Err(KernelError::NotSingleGraph(spec.graphs.len()));
    }
    if !(h > 0.0 && h < FRAC_PI_4) {
        return Err(KernelError::StepTooLarge(h));
    }
    for (index, &value) in base_phis.iter().enumerate() {
        if !(value > h && value < PI - h) {
            return Err(KernelError::BaseOutOfRange { index, value });
        }
    }
    let kernel = spec.compile::<f64>()?;
    let q = kernel.n_qubits();
    if base_phis.len() != q {
        return Err(crate::simulator::SimError::SizeError { len: base_phis.len() }.into());
    }

    let mut entries = vec![0.0; q * q];
    let mut probe = base_phis.to_vec();
    for j in 0..q {
        probe[j] = base_phis[j] + h;
        let plus = kernel.eval(&probe)?;
        probe[j] = base_phis[j] - h;
        let minus = kernel.eval(&probe)?;
        probe[j] = base_phis[j];
        for i in 0..q {
            entries[i * q + j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(SensitivityMatrix { size: q, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_graph, GraphKind};
    use crate::simulator::Schedule;
    use std::f64::consts::FRAC_PI_2;

    fn free_spec(n: usize) -> KernelSpec {
        let mut spec = KernelSpec::single(make_graph(&GraphKind::Empty, n).unwrap());
        spec.schedule = Schedule::Constant { omega: 0.0, delta: 0.3 };
        spec
    }

    #[test]
    fn unentangled_kernel_is_diagonal() {
        let base = [0.4, 1.0, 1.9, 2.6];
        let s = sensitivity_matrix(&free_spec(2), &base, DEFAULT_FD_STEP).unwrap();
        assert!(s.max_off_diagonal() < 1e-8);
        for (i, phi) in base.iter().enumerate() {
            assert!((s.get(i, i) - phi.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn step_and_base_checks() {
        let spec = free_spec(2);
        assert_eq!(
            sensitivity_matrix(&spec, &[1.0; 4], FRAC_PI_4),
            Err(KernelError::StepTooLarge(FRAC_PI_4))
        );
        assert!(matches!(
            sensitivity_matrix(&spec, &[1.0, 1.0, 1.0, 0.0], 1e-5),
            Err(KernelError::BaseOutOfRange { index: 3, .. })
        ));
        assert!(sensitivity_matrix(&spec, &[1.0; 9], 1e-5).is_err());
    }

    fn kings(n: usize) -> KernelSpec {
        KernelSpec::single(make_graph(&GraphKind::Kings, n).unwrap())
    }

    /// Rotations and reflections of a 2x2 patch as qubit permutations.
    const D4_2X2: [[usize; 4]; 8] = [
        [0, 1, 2, 3],
        [1, 3, 0, 2],
        [3, 2, 1, 0],
        [2, 0, 3, 1],
        [1, 0, 3, 2],
        [2, 3, 0, 1],
        [0, 2, 1, 3],
        [3, 1, 2, 0],
    ];

    #[test]
    fn kings_adjacent_pairs_respond_at_interior_bases() {
        let spec = kings(2);
        for base in [[1.0, 1.3, 1.9, 2.2], [0.7, 2.5, 1.2, 1.6], [1.67; 4]] {
            let s = sensitivity_matrix(&spec, &base, DEFAULT_FD_STEP).unwrap();
            for &(a, b) in &spec.graphs[0].edges {
                assert!(s.get(a, b).abs() > 1e-7, "{base:?} ({a},{b}) {}", s.get(a, b));
                assert!(s.get(b, a).abs() > 1e-7, "{base:?} ({b},{a}) {}", s.get(b, a));
            }
        }
    }

    // At phi = pi/2 every qubit starts in |0> and the first-order response of
    // <Z_i> to phi_j (i != j) cancels; the exact derivative is ~1e-11 there.
    #[test]
    #[ignore = "unattainable: cross-derivatives vanish to first order at the all-pi/2 base"]
    fn kings_all_half_pi_adjacent_entries_exceed_threshold() {
        let spec = kings(2);
        let s = sensitivity_matrix(&spec, &[FRAC_PI_2; 4], DEFAULT_FD_STEP).unwrap();
        for &(a, b) in &spec.graphs[0].edges {
            assert!(s.get(a, b).abs() > 1e-7, "({a},{b}) {}", s.get(a, b));
        }
    }

    #[test]
    fn square_symmetries_permute_the_matrix() {
        let spec = kings(2);
        for base in [[FRAC_PI_2; 4], [1.2; 4]] {
            let s = sensitivity_matrix(&spec, &base, DEFAULT_FD_STEP).unwrap();
            for p in D4_2X2 {
                for i in 0..4 {
                    for j in 0..4 {
                        assert!((s.get(p[i], p[j]) - s.get(i, j)).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
