//! Problem-Hamiltonian construction and exact ground-state oracles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eig::hermitian_eigenvalues;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};
use crate::rng::Stream;

/// Default size cap for dense diagonalization.
pub const GROUND_ENERGY_CAP: usize = 10;

/// A simple undirected graph, optionally edge-weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInstance {
    pub n_vertices: usize,
    /// Unordered distinct pairs, stored with i < j, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Per-edge weights aligned with `edges`; `None` for unit weights.
    pub weights: Option<Vec<f64>>,
}

impl GraphInstance {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>, weights: Option<Vec<f64>>) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (i, j) in edges {
            if i == j {
                return Err(Error::invalid(format!("self-loop at vertex {i}")));
            }
            if i >= n_vertices || j >= n_vertices {
                return Err(Error::invalid(format!("edge ({i},{j}) out of range")));
            }
            norm.push((i.min(j), i.max(j)));
        }
        let order: Vec<usize> = {
            let mut idx: Vec<usize> = (0..norm.len()).collect();
            idx.sort_by_key(|&k| norm[k]);
            idx
        };
        let sorted_edges: Vec<_> = order.iter().map(|&k| norm[k]).collect();
        for w in sorted_edges.windows(2) {
            if w[0] == w[1] {
                return Err(Error::invalid(format!("duplicate edge {:?}", w[0])));
            }
        }
        let weights = match weights {
            Some(ws) => {
                if ws.len() != sorted_edges.len() {
                    return Err(Error::invalid("weight count != edge count"));
                }
                Some(order.iter().map(|&k| ws[k]).collect())
            }
            None => None,
        };
        Ok(GraphInstance { n_vertices, edges: sorted_edges, weights })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n_vertices];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Graph file format: first line `n m`, then `i j [w]` per edge.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (lineno, header) = lines.next().ok_or_else(|| Error::invalid("empty graph file"))?;
        let mut hp = header.split_whitespace();
        let parse_usize = |tok: Option<&str>, lineno: usize| -> Result<usize> {
            tok.ok_or(Error::Parse { line: lineno, msg: "missing field".into() })?
                .parse()
                .map_err(|_| Error::Parse { line: lineno, msg: "bad integer".into() })
        };
        let n = parse_usize(hp.next(), lineno)?;
        let m = parse_usize(hp.next(), lineno)?;
        let mut edges = Vec::with_capacity(m);
        let mut weights: Vec<f64> = Vec::new();
        for _ in 0..m {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::invalid("graph file ends before all edges are listed"))?;
            let mut p = line.split_whitespace();
            let i = parse_usize(p.next(), lineno)?;
            let j = parse_usize(p.next(), lineno)?;
            if let Some(w) = p.next() {
                let w: f64 = w
                    .parse()
                    .map_err(|_| Error::Parse { line: lineno, msg: "bad weight".into() })?;
                weights.push(w);
            }
            edges.push((i, j));
        }
        let weights = if weights.is_empty() {
            None
        } else if weights.len() == edges.len() {
            Some(weights)
        } else {
            return Err(Error::invalid("either all edges carry weights or none"));
        };
        GraphInstance::new(n, edges, weights)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        GraphInstance::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_vertices, self.edges.len());
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            match &self.weights {
                Some(ws) => out.push_str(&format!("{i} {j} {:?}\n", ws[k])),
                None => out.push_str(&format!("{i} {j}\n")),
            }
        }
        out
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// H_MaxCut = sum_{(i,j) in E} (I - Z_i Z_j) / 2, identity part kept.
pub fn build_maxcut(graph: &GraphInstance) -> Result<WeightedPauliSum> {
    if graph.edges.is_empty() {
        return Err(Error::invalid("MaxCut needs at least one edge"));
    }
    let n = graph.n_vertices;
    let mut terms = vec![(0.5 * graph.edges.len() as f64, PauliString::identity(n))];
    for &(i, j) in &graph.edges {
        terms.push((-0.5, PauliString::pair(n, i, j, Pauli::Z, Pauli::Z)?));
    }
    WeightedPauliSum::new(n, terms)
}

/// H_SK = sum_{i<j} J_ij Z_i Z_j with J_ij ~ N(0,1) from the seeded stream.
pub fn build_sk(n: usize, seed: u64) -> Result<WeightedPauliSum> {
    if n < 2 {
        return Err(Error::invalid("SK model needs n >= 2"));
    }
    let mut rng = Stream::new(seed, &[Stream::tag("sk-couplings"), n as u64]);
    let mut terms = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            terms.push((rng.normal(), PauliString::pair(n, i, j, Pauli::Z, Pauli::Z)?));
        }
    }
    WeightedPauliSum::new(n, terms)
}

/// H_TFIM = -J sum_i Z_i Z_{i+1} - h sum_i X_i on an open chain.
pub fn build_tfim(n: usize, coupling: f64, field: f64) -> Result<WeightedPauliSum> {
    if n < 2 {
        return Err(Error::invalid("TFIM needs n >= 2"));
    }
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        terms.push((-coupling, PauliString::pair(n, i, i + 1, Pauli::Z, Pauli::Z)?));
    }
    for i in 0..n {
        terms.push((-field, PauliString::single(n, i, Pauli::X)?));
    }
    WeightedPauliSum::new(n, terms)
}

/// Random simple 3-regular graph by the seeded configuration model,
/// rejecting pairings that produce self-loops or multi-edges.
pub fn generate_3regular(n: usize, seed: u64) -> Result<GraphInstance> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::invalid("3-regular graphs need even n >= 4"));
    }
    let mut rng = Stream::new(seed, &[Stream::tag("3regular"), n as u64]);
    'attempt: for _ in 0..100_000 {
        // three stubs per vertex, Fisher-Yates pairing
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
        for i in (1..stubs.len()).rev() {
            let j = rng.below((i + 1) as u64) as usize;
            stubs.swap(i, j);
        }
        let mut seen = std::collections::BTreeSet::new();
        for pair in stubs.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                continue 'attempt;
            }
        }
        let edges: Vec<(usize, usize)> = seen.into_iter().collect();
        return GraphInstance::new(n, edges, None);
    }
    Err(Error::Numeric("configuration model failed to produce a simple graph".into()))
}

/// Smallest eigenvalue of the dense matrix of `h`.
///
/// Diagonal sums are minimized by direct enumeration over basis states;
/// everything else goes through the Jacobi eigensolver.
pub fn exact_ground_energy(h: &WeightedPauliSum) -> Result<f64> {
    exact_ground_energy_capped(h, GROUND_ENERGY_CAP)
}

pub fn exact_ground_energy_capped(h: &WeightedPauliSum, cap: usize) -> Result<f64> {
    let n = h.n_qubits();
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    let dim = 1usize << n;
    if h.is_diagonal() {
        let mut best = f64::INFINITY;
        for b in 0..dim {
            best = best.min(h.diagonal_value(b)?);
        }
        return Ok(best);
    }
    let eig = hermitian_eigenvalues(h.dense_matrix(), dim);
    Ok(eig[0])
}

/// Largest diagonal value of a diagonal sum; C_max for MaxCut.
pub fn max_diagonal_value(h: &WeightedPauliSum) -> Result<f64> {
    if !h.is_diagonal() {
        return Err(Error::invalid("observable is not diagonal"));
    }
    let dim = 1usize << h.n_qubits();
    let mut best = f64::NEG_INFINITY;
    for b in 0..dim {
        best = best.max(h.diagonal_value(b)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> GraphInstance {
        GraphInstance::new(3, vec![(0, 1), (1, 2), (0, 2)], None).unwrap()
    }

    #[test]
    fn maxcut_triangle_expansion() {
        let h = build_maxcut(&triangle()).unwrap();
        assert_eq!(h.identity_coefficient(), 1.5);
        let zz: Vec<_> = h.non_identity_terms().collect();
        assert_eq!(zz.len(), 3);
        for (c, s) in zz {
            assert_eq!(*c, -0.5);
            assert!(s.is_diagonal());
        }
    }

    #[test]
    fn maxcut_single_edge_brute_force_max() {
        let g = GraphInstance::new(2, vec![(0, 1)], None).unwrap();
        let h = build_maxcut(&g).unwrap();
        assert_eq!(max_diagonal_value(&h).unwrap(), 1.0);
    }

    #[test]
    fn maxcut_triangle_brute_force_max() {
        let h = build_maxcut(&triangle()).unwrap();
        assert_eq!(max_diagonal_value(&h).unwrap(), 2.0);
    }

    #[test]
    fn maxcut_rejects_edgeless() {
        let g = GraphInstance::new(2, vec![], None).unwrap();
        assert!(build_maxcut(&g).is_err());
    }

    #[test]
    fn sk_deterministic_and_counted() {
        let a = build_sk(4, 9).unwrap();
        let b = build_sk(4, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_terms(), 6);
        assert_ne!(a, build_sk(4, 10).unwrap());
    }

    #[test]
    fn sk_ground_energy_matches_spin_enumeration() {
        let h = build_sk(3, 5).unwrap();
        // independent oracle: minimize sum J_ij s_i s_j over all 8 assignments
        let mut coeffs = vec![];
        for (c, s) in h.non_identity_terms() {
            let sup = s.support();
            coeffs.push((sup[0], sup[1], *c));
        }
        let mut best = f64::INFINITY;
        for b in 0..8u32 {
            let spin = |q: usize| if (b >> (2 - q)) & 1 == 1 { -1.0 } else { 1.0 };
            let e: f64 = coeffs.iter().map(|&(i, j, c)| c * spin(i) * spin(j)).sum();
            best = best.min(e);
        }
        assert!((exact_ground_energy(&h).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn tfim_small_ground_energies() {
        let h = build_tfim(2, 1.0, 0.0).unwrap();
        assert!((exact_ground_energy(&h).unwrap() + 1.0).abs() < 1e-10);
        let h = build_tfim(2, 0.0, 1.0).unwrap();
        assert!((exact_ground_energy(&h).unwrap() + 2.0).abs() < 1e-10);
    }

    #[test]
    fn tfim_n2_matches_analytic_eigenvalues() {
        // J=1, h=1: H = -ZZ - X1 - X2; analytic eigenvalues of the 4x4
        // matrix are {-sqrt(1+4), -1, 1, sqrt(5)} with min -sqrt(5).
        let h = build_tfim(2, 1.0, 1.0).unwrap();
        let e = exact_ground_energy(&h).unwrap();
        assert!((e + 5.0f64.sqrt()).abs() < 1e-9, "{e}");
    }

    #[test]
    fn tfim_n3_matches_dense_diagonalization() {
        let h = build_tfim(3, 1.0, 1.0).unwrap();
        let eig = hermitian_eigenvalues(h.dense_matrix(), 8);
        assert!((exact_ground_energy(&h).unwrap() - eig[0]).abs() < 1e-9);
    }

    #[test]
    fn identity_sum_ground_energy_is_constant() {
        let h = WeightedPauliSum::parse_text("2.5 II").unwrap();
        assert_eq!(exact_ground_energy(&h).unwrap(), 2.5);
    }

    #[test]
    fn single_z_ground_energy() {
        let h = WeightedPauliSum::parse_text("1.0 Z").unwrap();
        assert_eq!(exact_ground_energy(&h).unwrap(), -1.0);
    }

    #[test]
    fn cap_is_enforced() {
        let h = build_tfim(4, 1.0, 1.0).unwrap();
        assert!(matches!(
            exact_ground_energy_capped(&h, 3),
            Err(Error::SizeCap { n: 4, cap: 3 })
        ));
    }

    #[test]
    fn three_regular_k4_and_degrees() {
        let g = generate_3regular(4, 1).unwrap();
        assert_eq!(g.edges.len(), 6); // K4
        for n in [4usize, 6, 8] {
            for seed in 0..5u64 {
                let g = generate_3regular(n, seed).unwrap();
                assert!(g.degrees().iter().all(|&d| d == 3), "n={n} seed={seed}");
                assert_eq!(g, generate_3regular(n, seed).unwrap());
            }
        }
        assert!(generate_3regular(5, 0).is_err());
    }

    #[test]
    fn graph_file_round_trip() {
        let g = generate_3regular(6, 3).unwrap();
        let g2 = GraphInstance::parse_text(&g.to_text()).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn hermiticity_of_dense_assembly() {
        for seed in 0..3 {
            let h = build_sk(4, seed).unwrap();
            let dim = 16;
            let m = h.dense_matrix();
            for i in 0..dim {
                for j in 0..dim {
                    assert!((m[i * dim + j] - m[j * dim + i].conj()).norm() < 1e-12);
                }
            }
        }
    }
}
