use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{KernelError, Result};

/// Built-in connectivity families, or an explicit edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphKind {
    /// All pairs at Chebyshev distance 1.
    Kings,
    /// Horizontal and vertical neighbours.
    Grid4,
    /// Diagonal neighbours only.
    Diag,
    /// Cycle around the patch boundary.
    Ring,
    /// No interactions.
    Empty,
    Custom(Vec<(usize, usize)>),
}

impl FromStr for GraphKind {
    type Err = KernelError;

    /// `kings`, `grid4`, `diag`, `ring`, `empty` or `custom:0-1,1-3`; edges may
    /// also be separated by `;`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "kings" => return Ok(Self::Kings),
            "grid4" => return Ok(Self::Grid4),
            "diag" => return Ok(Self::Diag),
            "ring" => return Ok(Self::Ring),
            "empty" => return Ok(Self::Empty),
            _ => {}
        }
        let Some(list) = s.strip_prefix("custom:") else {
            return Err(KernelError::UnknownGraphName(s.to_string()));
        };
        let mut edges = Vec::new();
        for item in list.split([',', ';']).map(str::trim).filter(|t| !t.is_empty()) {
            let parsed = item
                .split_once('-')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match parsed {
                Some(edge) => edges.push(edge),
                None => return Err(KernelError::UnknownGraphName(s.to_string())),
            }
        }
        Ok(Self::Custom(edges))
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kings => f.write_str("kings"),
            Self::Grid4 => f.write_str("grid4"),
            Self::Diag => f.write_str("diag"),
            Self::Ring => f.write_str("ring"),
            Self::Empty => f.write_str("empty"),
            Self::Custom(edges) => {
                f.write_str("custom:")?;
                for (k, (a, b)) in edges.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}-{b}")?;
                }
                Ok(())
            }
        }
    }
}

/// Qubit connectivity over an `n x n` patch. Qubit `i` sits at
/// `positions[i]`, `[row, col]` on a unit lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub positions: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Graph {
    /// Validates and canonicalises: each edge stored as `(lo, hi)`, sorted.
    pub fn new(
        n: usize,
        positions: Vec<[f64; 2]>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        name: Option<String>,
    ) -> Result<Self> {
        let qubits = n * n;
        if n == 0 {
            return Err(KernelError::InvalidSize(n));
        }
        if positions.len() != qubits {
            return Err(KernelError::InvalidGraph(format!(
                "{} positions for {qubits} qubits",
                positions.len()
            )));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(KernelError::InvalidGraph("non-finite position".into()));
        }
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= qubits || b >= qubits || a == b {
                return Err(KernelError::InvalidEdge { a, b, qubits });
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(KernelError::InvalidEdge {
                a: w[0].0,
                b: w[0].1,
                qubits,
            });
        }
        Ok(Self {
            n,
            positions,
            edges: canon,
            name,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n * self.n
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.distance_sq(a, b).sqrt()
    }

    /// Exact for integer lattice positions.
    pub fn distance_sq(&self, a: usize, b: usize) -> f64 {
        let [ra, ca] = self.positions[a];
        let [rb, cb] = self.positions[b];
        (ra - rb).powi(2) + (ca - cb).powi(2)
    }

    /// Same graph with qubit `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let q = self.n_qubits();
        let mut seen = vec![false; q];
        if perm.len() != q || perm.iter().any(|&p| p >= q || std::mem::replace(&mut seen[p], true)) {
            return Err(KernelError::InvalidGraph("relabelling is not a permutation".into()));
        }
        let mut positions = vec![[0.0; 2]; q];
        for (i, &p) in perm.iter().enumerate() {
            positions[p] = self.positions[i];
        }
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b]));
        Self::new(self.n, positions, edges, self.name.clone())
    }
}

/// Row-major integer lattice `{0..n-1} x {0..n-1}`.
pub fn grid_positions(n: usize) -> Vec<[f64; 2]> {
    (0..n * n).map(|i| [(i / n) as f64, (i % n) as f64]).collect()
}

/// Builds a named connectivity graph on an `n x n` patch.
pub fn make_graph(kind: &GraphKind, n: usize) -> Result<Graph> {
    let builtin = !matches!(kind, GraphKind::Custom(_) | GraphKind::Empty);
    if builtin && !(2..=3).contains(&n) {
        return Err(KernelError::InvalidSize(n));
    }
    if !(1..=3).contains(&n) {
        return Err(KernelError::InvalidSize(n));
    }
    let idx = |r: usize, c: usize| r * n + c;
    let mut edges = Vec::new();
    let lattice_pairs = |keep: &dyn Fn(usize, usize) -> bool, edges: &mut Vec<(usize, usize)>| {
        for a in 0..n * n {
            for b in (a + 1)..n * n {
                let dr = (a / n).abs_diff(b / n);
                let dc = (a % n).abs_diff(b % n);
                if keep(dr, dc) {
                    edges.push((a, b));
                }
            }
        }
    };
    match kind {
        GraphKind::Kings => lattice_pairs(&|dr, dc| dr.max(dc) == 1, &mut edges),
        GraphKind::Grid4 => lattice_pairs(&|dr, dc| dr + dc == 1, &mut edges),
        GraphKind::Diag => lattice_pairs(&|dr, dc| dr == 1 && dc == 1, &mut edges),
        GraphKind::Ring => {
            let mut cycle = Vec::new();
            cycle.extend((0..n).map(|c| idx(0, c)));
            cycle.extend((1..n).map(|r| idx(r, n - 1)));
            cycle.extend((0..n - 1).rev().map(|c| idx(n - 1, c)));
            cycle.extend((1..n - 1).rev().map(|r| idx(r, 0)));
            for k in 0..cycle.len() {
                edges.push((cycle[k], cycle[(k + 1) % cycle.len()]));
            }
        }
        GraphKind::Empty => {}
        GraphKind::Custom(list) => edges.extend_from_slice(list),
    }
    Graph::new(n, grid_positions(n), edges, Some(kind.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent count: enumerate ordered cell pairs and halve.
    fn brute_force_count(n: usize, adjacent: impl Fn(i64, i64) -> bool) -> usize {
        let mut count = 0;
        for r1 in 0..n as i64 {
            for c1 in 0..n as i64 {
                for r2 in 0..n as i64 {
                    for c2 in 0..n as i64 {
                        if (r1, c1) != (r2, c2) && adjacent(r1 - r2, c1 - c2) {
                            count += 1;
                        }
                    }
                }
            }
        }
        count / 2
    }

    #[test]
    fn edge_counts() {
        assert_eq!(make_graph(&GraphKind::Kings, 2).unwrap().edges.len(), 6);
        let kings3 = brute_force_count(3, |dr, dc| dr.abs().max(dc.abs()) == 1);
        assert_eq!(kings3, 20);
        assert_eq!(make_graph(&GraphKind::Kings, 3).unwrap().edges.len(), kings3);
        let grid3 = brute_force_count(3, |dr, dc| dr.abs() + dc.abs() == 1);
        assert_eq!(grid3, 12);
        assert_eq!(make_graph(&GraphKind::Grid4, 3).unwrap().edges.len(), grid3);
        assert_eq!(make_graph(&GraphKind::Diag, 3).unwrap().edges.len(), 8);
        assert_eq!(make_graph(&GraphKind::Ring, 3).unwrap().edges.len(), 8);
        assert_eq!(make_graph(&GraphKind::Ring, 2).unwrap().edges.len(), 4);
        assert!(make_graph(&GraphKind::Empty, 2).unwrap().edges.is_empty());
    }

    #[test]
    fn variants_are_subgraphs_of_kings() {
        for n in [2, 3] {
            let kings = make_graph(&GraphKind::Kings, n).unwrap();
            for kind in [GraphKind::Grid4, GraphKind::Diag, GraphKind::Ring] {
                let g = make_graph(&kind, n).unwrap();
                assert!(g.edges.iter().all(|&(a, b)| kings.has_edge(a, b)), "{kind}");
            }
        }
    }

    #[test]
    fn kings_2x2_is_complete() {
        let g = make_graph(&GraphKind::Kings, 2).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(g.positions, vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            "hexagon".parse::<GraphKind>(),
            Err(KernelError::UnknownGraphName(_))
        ));
        assert!(matches!(
            make_graph(&GraphKind::Custom(vec![(0, 4)]), 2),
            Err(KernelError::InvalidEdge { .. })
        ));
        assert!(matches!(
            make_graph(&GraphKind::Custom(vec![(1, 1)]), 2),
            Err(KernelError::InvalidEdge { .. })
        ));
        assert!(matches!(
            make_graph(&GraphKind::Custom(vec![(0, 1), (1, 0)]), 2),
            Err(KernelError::InvalidEdge { .. })
        ));
        assert!(matches!(
            make_graph(&GraphKind::Kings, 4),
            Err(KernelError::InvalidSize(4))
        ));
    }

    #[test]
    fn parse_display_round_trip() {
        for s in ["kings", "grid4", "diag", "ring", "empty", "custom:0-1,2-3", "custom:"] {
            assert_eq!(s.parse::<GraphKind>().unwrap().to_string(), s);
        }
        assert_eq!(
            "custom: 1-0 , 2-3".parse::<GraphKind>().unwrap(),
            GraphKind::Custom(vec![(1, 0), (2, 3)])
        );
        assert_eq!(
            "custom:0-1;1-3".parse::<GraphKind>().unwrap(),
            GraphKind::Custom(vec![(0, 1), (1, 3)])
        );
    }

    #[test]
    fn relabel_moves_positions_and_edges() {
        let g = make_graph(&GraphKind::Diag, 2).unwrap();
        let r = g.relabel(&[1, 0, 3, 2]).unwrap();
        assert_eq!(r.edges, vec![(0, 3), (1, 2)]);
        assert_eq!(r.positions[1], [0.0, 0.0]);
        assert!(g.relabel(&[0, 0, 1, 2]).is_err());
    }
}
