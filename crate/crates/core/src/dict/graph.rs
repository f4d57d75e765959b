//! Graph dictionaries: the Laplacian eigenbasis (GFT) and Haar-style
//! wavelets from recursive Fiedler bisection.

use nalgebra::{DMatrix, DVector};

use super::{GraphAtomMeta, GraphDictionary, GraphDictionaryKind};
use crate::graph::Graph;
use crate::linalg;

/// Lowest-frequency fraction of the Laplacian eigenbasis.
///
/// Keeps the `m = max(1, ⌈fraction·n⌉)` eigenvectors with the smallest
/// eigenvalues, sorted ascending, as dictionary columns. With `fraction = 1`
/// this is the full graph Fourier basis. Smaller fractions are column
/// prefixes of larger ones, so partial dictionaries stay nested.
pub fn build_gft(g: &Graph, fraction: f64) -> GraphDictionary {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "fraction must be in (0, 1], got {fraction}"
    );
    let n = g.node_count();
    assert!(n >= 1, "graph must have at least one node");
    let m = ((fraction * n as f64).ceil() as usize).clamp(1, n);

    let lap = g.laplacian();
    let (values, vectors) = linalg::sym_eigen_ascending(&lap.l);
    let psi = vectors.columns(0, m).clone_owned();
    let atom_meta = (0..m).map(|i| GraphAtomMeta::Eigenvalue(values[i])).collect();

    let dict = GraphDictionary {
        psi,
        kind: GraphDictionaryKind::Gft,
        orthonormal_columns: true,
        atom_meta,
    };
    dict.assert_valid();
    dict
}

/// Haar-style wavelet basis from recursive Fiedler bisection.
///
/// The first atom is constant `1/√n`. Each subset with at least two nodes is
/// bisected by the sign of its Fiedler vector (entries `>= 0` on one side),
/// emitting one two-level atom per split and recursing on both sides.
/// Disconnected subsets are bisected into their first connected component
/// versus the rest, since the Fiedler sign carries no information there.
pub fn build_graph_haar(g: &Graph) -> GraphDictionary {
    let n = g.node_count();
    assert!(n >= 1, "graph must have at least one node");

    let mut atoms: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut atom_meta: Vec<GraphAtomMeta> = Vec::with_capacity(n);
    atoms.push(DVector::from_element(n, 1.0 / (n as f64).sqrt()));
    atom_meta.push(GraphAtomMeta::HaarDepth(0));

    let all: Vec<usize> = (0..n).collect();
    let mut stack: Vec<(Vec<usize>, usize)> = vec![(all, 0)];
    while let Some((subset, depth)) = stack.pop() {
        let Some((left, right)) = bisect(g, &subset) else {
            continue;
        };
        atoms.push(two_level_atom(n, &left, &right));
        atom_meta.push(GraphAtomMeta::HaarDepth(depth));
        // Push right first so the left side is processed first (DFS order),
        // keeping the atom order deterministic.
        stack.push((right, depth + 1));
        stack.push((left, depth + 1));
    }

    let m = atoms.len();
    let mut psi = DMatrix::zeros(n, m);
    for (j, atom) in atoms.iter().enumerate() {
        psi.set_column(j, atom);
    }
    let dict = GraphDictionary {
        psi,
        kind: GraphDictionaryKind::GraphHaar,
        orthonormal_columns: true,
        atom_meta,
    };
    dict.assert_valid();
    dict
}

/// Split `subset` for the Haar recursion, or `None` when it cannot be split
/// (singleton, or a constant-sign Fiedler vector).
fn bisect(g: &Graph, subset: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    if subset.len() < 2 {
        return None;
    }
    let comps = induced_components(g, subset);
    if comps.len() > 1 {
        let left = comps[0].clone();
        let right: Vec<usize> = comps[1..].iter().flatten().copied().collect();
        let mut right = right;
        right.sort_unstable();
        return Some((left, right));
    }
    let f = g
        .fiedler_vector(subset)
        .expect("connected subset of >= 2 nodes");
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, &v) in subset.iter().enumerate() {
        if f[i] >= 0.0 {
            left.push(v);
        } else {
            right.push(v);
        }
    }
    if left.is_empty() || right.is_empty() {
        return None;
    }
    Some((left, right))
}

fn induced_components(g: &Graph, subset: &[usize]) -> Vec<Vec<usize>> {
    let k = subset.len();
    let adj = g.adjacency();
    let mut seen = vec![false; k];
    let mut comps = Vec::new();
    for start in 0..k {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(a) = stack.pop() {
            comp.push(subset[a]);
            for b in 0..k {
                if !seen[b] && adj[(subset[a], subset[b])] != 0.0 {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

fn two_level_atom(n: usize, left: &[usize], right: &[usize]) -> DVector<f64> {
    let (a, b) = (left.len() as f64, right.len() as f64);
    let pos = b.sqrt() / (a.sqrt() * (a + b).sqrt());
    let neg = -a.sqrt() / (b.sqrt() * (a + b).sqrt());
    let mut atom = DVector::zeros(n);
    for &v in left {
        atom[v] = pos;
    }
    for &v in right {
        atom[v] = neg;
    }
    atom
}
