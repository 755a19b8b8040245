//! Inter-satellite communication graphs and Metropolis mixing matrices.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::constellation::{propagate_all, OrbitalElements};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Undirected communication graph over the LEO nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    pub index: usize,
    /// Sorted neighbor lists, no self-loops.
    pub neighbors: Vec<Vec<usize>>,
}

impl GraphSnapshot {
    pub fn from_edges(index: usize, nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut neighbors = vec![Vec::new(); nodes];
        for &(a, b) in edges {
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Self { index, neighbors }
    }

    pub fn nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, l: usize) -> usize {
        self.neighbors[l].len()
    }

    /// Edges with `l < q`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (l, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|&&q| q > l).map(|&q| (l, q)));
        }
        out
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                for &q in &self.neighbors[comp[i]] {
                    if !seen[q] {
                        seen[q] = true;
                        comp.push(q);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn ensure_connected(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() > 1 {
            return Err(Error::DisconnectedGraph { components: comps });
        }
        Ok(())
    }
}

/// Union of every node's `k` nearest neighbors (Euclidean), ties to the lower index.
pub fn knn_graph(index: usize, positions: &[Vector3<f64>], k: usize) -> Result<GraphSnapshot> {
    let n = positions.len();
    if k == 0 || n <= k {
        return Err(Error::InvalidConfig(alloc::format!(
            "k = {k} nearest neighbors needs more than k nodes and k >= 1, got {n} nodes"
        )));
    }
    let mut edges = Vec::with_capacity(n * k);
    for l in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n)
            .filter(|&q| q != l)
            .map(|q| ((positions[q] - positions[l]).norm_squared(), q))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(d.iter().take(k).map(|&(_, q)| (l, q)));
    }
    let g = GraphSnapshot::from_edges(index, n, &edges);
    g.ensure_connected()?;
    Ok(g)
}

/// `count` snapshots sampled evenly over `[epoch0, epoch0 + horizon)`.
pub fn graph_sequence(
    elements: &[OrbitalElements],
    epoch0: f64,
    horizon: f64,
    count: usize,
    k: usize,
) -> Result<Vec<GraphSnapshot>> {
    if count == 0 {
        return Err(Error::InvalidConfig("graph count must be >= 1".into()));
    }
    (0..count)
        .map(|t| {
            let epoch = epoch0 + horizon * t as f64 / count as f64;
            let pos: Vec<Vector3<f64>> = propagate_all(elements, epoch).into_iter().map(|s| s.position).collect();
            knn_graph(t, &pos, k)
        })
        .collect()
}

/// Sparse symmetric doubly stochastic mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    /// Row `l`: `(q, w_lq)` for `q` in `{l} ∪ N_l`, ascending `q`.
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// One Metropolis row from the node's own degree and its neighbors' degrees.
pub fn metropolis_row(node: usize, degree: usize, neighbors: &[(usize, usize)]) -> Vec<(usize, f64)> {
    let mut row: Vec<(usize, f64)> = neighbors
        .iter()
        .map(|&(q, dq)| (q, 1.0 / (degree.max(dq) + 1) as f64))
        .collect();
    let off: f64 = row.iter().map(|e| e.1).sum();
    row.push((node, 1.0 - off));
    row.sort_by_key(|e| e.0);
    row
}

pub fn metropolis(graph: &GraphSnapshot) -> MixingMatrix {
    let rows = (0..graph.nodes())
        .map(|l| {
            let nb: Vec<(usize, usize)> = graph.neighbors[l].iter().map(|&q| (q, graph.degree(q))).collect();
            metropolis_row(l, graph.degree(l), &nb)
        })
        .collect();
    MixingMatrix { rows }
}

impl MixingMatrix {
    pub fn nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn weight(&self, l: usize, q: usize) -> f64 {
        self.rows[l].iter().find(|e| e.0 == q).map_or(0.0, |e| e.1)
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.nodes();
        let mut w = Matrix::zeros(n, n);
        for (l, row) in self.rows.iter().enumerate() {
            for &(q, v) in row {
                w[(l, q)] = v;
            }
        }
        w
    }

    /// `out_l = sum_q w_lq phi_q`.
    pub fn apply(&self, phi: &[Vector]) -> Vec<Vector> {
        self.rows
            .iter()
            .map(|row| {
                let mut acc = Vector::zeros(phi[0].len());
                for &(q, w) in row {
                    acc.axpy(w, &phi[q], 1.0);
                }
                acc
            })
            .collect()
    }

    /// Second-largest singular value; below one on a connected graph.
    pub fn second_singular_value(&self) -> f64 {
        let mut s: Vec<f64> = self.to_dense().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s.get(1).copied().unwrap_or(0.0)
    }
}

/// Mixing matrices switched on iteration count: snapshot `t` governs
/// iterations `[t * period, (t + 1) * period)`, the last one thereafter.
#[derive(Debug, Clone)]
pub struct GraphSchedule {
    pub graphs: Vec<GraphSnapshot>,
    pub mixing: Vec<MixingMatrix>,
    pub period: usize,
}

impl GraphSchedule {
    /// Splits `max_iterations` into equal periods, one per graph.
    pub fn new(graphs: Vec<GraphSnapshot>, max_iterations: usize) -> Self {
        let count = graphs.len().max(1);
        let period = max_iterations.div_ceil(count).max(1);
        let mixing = graphs.iter().map(metropolis).collect();
        Self { graphs, mixing, period }
    }

    pub fn at(&self, k: usize) -> &MixingMatrix {
        &self.mixing[(k / self.period).min(self.mixing.len() - 1)]
    }
}
