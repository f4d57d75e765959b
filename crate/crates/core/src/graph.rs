//! Weighted undirected graphs: edge-list loading, combinatorial Laplacian,
//! connected components, and Fiedler vectors.
//!
//! The Laplacian is `L = F - H` where `H` is the weighted adjacency matrix
//! and `F` the diagonal matrix of weighted degrees. All matrices are dense;
//! the graphs this crate targets are small enough that the full
//! eigendecomposition of `L` is needed anyway.

use std::collections::BTreeMap;
use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed edge row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("non-positive weight {weight} on edge row {line}")]
    NegativeWeight { line: usize, weight: f64 },
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("node set induces a disconnected subgraph")]
    DisconnectedInput,
    #[error("Fiedler vector needs at least 2 nodes, got {0}")]
    TooSmall(usize),
}

/// Weighted undirected graph over node indices `0..n`.
///
/// The adjacency matrix is symmetric with a zero diagonal and strictly
/// positive weights on edges. Duplicate undirected edges are merged by
/// summing their weights; self-loops are dropped.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    adjacency: DMatrix<f64>,
}

/// Combinatorial Laplacian `L = F - H` together with the degree matrix `F`.
#[derive(Debug, Clone)]
pub struct LaplacianPair {
    pub l: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

impl Graph {
    /// Build a graph over `0..n` from raw `(u, v, w)` edges.
    pub fn new(n: usize, raw_edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (line, &(u, v, w)) in raw_edges.iter().enumerate() {
            if u >= n {
                return Err(GraphError::IndexOutOfRange { index: u, n });
            }
            if v >= n {
                return Err(GraphError::IndexOutOfRange { index: v, n });
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(GraphError::NegativeWeight { line, weight: w });
            }
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            *merged.entry(key).or_insert(0.0) += w;
        }
        let mut adjacency = DMatrix::zeros(n, n);
        let mut edges = Vec::with_capacity(merged.len());
        for (&(u, v), &w) in &merged {
            adjacency[(u, v)] = w;
            adjacency[(v, u)] = w;
            edges.push((u, v, w));
        }
        Ok(Self { n, edges, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Merged undirected edges, `u < v`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// `L = F - H` with `F[i][i] = Σ_j H[i][j]`.
    pub fn laplacian(&self) -> LaplacianPair {
        let mut f = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            f[(i, i)] = self.adjacency.row(i).sum();
        }
        let l = &f - &self.adjacency;
        LaplacianPair { l, f }
    }

    /// Maximal connected node sets, each sorted ascending, ordered by
    /// smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        components_of(self.n, |u, v| self.adjacency[(u, v)] != 0.0)
    }

    /// Unit-norm eigenvector of the induced subgraph's Laplacian for its
    /// second-smallest eigenvalue. Entries follow the ascending order of
    /// `nodes`; the first entry of nonnegligible magnitude is nonnegative.
    pub fn fiedler_vector(&self, nodes: &[usize]) -> Result<DVector<f64>, GraphError> {
        let nodes = sorted_unique(nodes);
        if nodes.len() < 2 {
            return Err(GraphError::TooSmall(nodes.len()));
        }
        for &v in &nodes {
            if v >= self.n {
                return Err(GraphError::IndexOutOfRange { index: v, n: self.n });
            }
        }
        let sub = self.induced_laplacian(&nodes);
        let comps = components_of(nodes.len(), |a, b| {
            self.adjacency[(nodes[a], nodes[b])] != 0.0
        });
        if comps.len() > 1 {
            return Err(GraphError::DisconnectedInput);
        }
        let (_, vectors) = linalg::sym_eigen_ascending(&sub);
        let mut v = vectors.column(1).clone_owned();
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        linalg::fix_sign(&mut v);
        Ok(v)
    }

    /// Laplacian of the subgraph induced by `nodes` (sorted, deduplicated).
    pub(crate) fn induced_laplacian(&self, nodes: &[usize]) -> DMatrix<f64> {
        let k = nodes.len();
        let mut h = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    h[(a, b)] = self.adjacency[(nodes[a], nodes[b])];
                }
            }
        }
        let mut l = -h;
        for a in 0..k {
            let deg = -l.row(a).sum() - l[(a, a)];
            l[(a, a)] = deg;
        }
        l
    }
}

fn sorted_unique(nodes: &[usize]) -> Vec<usize> {
    let mut v = nodes.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Connected components of an implicit graph on `0..n` given an edge
/// predicate; each component sorted, components ordered by smallest member.
fn components_of(n: usize, connected: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = Vec::new();
        seen[start] = true;
        while let Some(u) = stack.pop() {
            comp.push(u);
            for v in 0..n {
                if !seen[v] && connected(u, v) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Parse an edge-list CSV: one `u,v[,w]` row per line, 0-based ids, weight
/// defaulting to 1.0. A leading `u,v,w` (or `u,v`) header is skipped.
/// `n` is one past the largest index seen, so isolated trailing nodes must
/// be introduced by a self-loop row (which is otherwise dropped).
pub fn load_graph<R: BufRead>(reader: R) -> Result<Graph, GraphError> {
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_index: Option<usize> = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GraphError::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 0 && is_header(trimmed) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(GraphError::MalformedRow {
                line: line_no,
                reason: format!("expected 2 or 3 fields, got {}", fields.len()),
            });
        }
        let u: usize = fields[0].parse().map_err(|_| GraphError::MalformedRow {
            line: line_no,
            reason: format!("non-numeric node id {:?}", fields[0]),
        })?;
        let v: usize = fields[1].parse().map_err(|_| GraphError::MalformedRow {
            line: line_no,
            reason: format!("non-numeric node id {:?}", fields[1]),
        })?;
        let w: f64 = if fields.len() == 3 {
            fields[2].parse().map_err(|_| GraphError::MalformedRow {
                line: line_no,
                reason: format!("non-numeric weight {:?}", fields[2]),
            })?
        } else {
            1.0
        };
        if w <= 0.0 || !w.is_finite() {
            return Err(GraphError::NegativeWeight { line: line_no, weight: w });
        }
        max_index = Some(max_index.unwrap_or(0).max(u).max(v));
        edges.push((u, v, w));
    }
    let n = max_index.map_or(0, |m| m + 1);
    Graph::new(n, &edges)
}

fn is_header(line: &str) -> bool {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    matches!(fields.as_slice(), ["u", "v"] | ["u", "v", "w"])
}
