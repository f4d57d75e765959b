//! Fixed graph and time dictionaries.
//!
//! A graph dictionary stacks atoms as the *columns* of `Ψ ∈ R^{n×m}`; a time
//! dictionary stacks atoms as the *rows* of `Φ ∈ R^{s×t}`. Every built
//! instance carries per-atom metadata and an orthonormality flag that is
//! checked numerically at construction time.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod graph;
mod time;

pub use graph::{build_gft, build_graph_haar};
pub use time::{
    bspline_value, build_fourier, build_ramanujan, build_ramanujan_dedup, build_spline,
    euler_totient, ramanujan_sum,
};

/// Max-norm tolerance for the orthonormality checks.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DictError {
    #[error("max period {g_max} exceeds signal length {t}")]
    GMaxTooLarge { g_max: usize, t: usize },
    #[error("spline needs degree+1 <= n_basis <= t, got n_basis={n_basis}, degree={degree}, t={t}")]
    InsufficientBasis { n_basis: usize, degree: usize, t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphDictionaryKind {
    Gft,
    GraphHaar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDictionaryKind {
    Fourier,
    Ramanujan,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierPhase {
    Cos,
    Sin,
}

/// Per-atom metadata for graph dictionaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphAtomMeta {
    /// Laplacian eigenvalue of a GFT atom.
    Eigenvalue(f64),
    /// Recursion depth of the subset a Haar atom bisects (constant atom: 0).
    HaarDepth(usize),
}

/// Per-atom metadata for time dictionaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeAtomMeta {
    Fourier {
        frequency: usize,
        phase: FourierPhase,
    },
    Ramanujan {
        period: usize,
        divisor: usize,
        column: usize,
    },
    Spline {
        /// Support interval `[start, end)` in knot coordinates.
        support: (f64, f64),
    },
}

/// Fixed graph dictionary `Ψ ∈ R^{n×m}` with atoms as columns.
#[derive(Debug, Clone)]
pub struct GraphDictionary {
    pub psi: DMatrix<f64>,
    pub kind: GraphDictionaryKind,
    pub orthonormal_columns: bool,
    pub atom_meta: Vec<GraphAtomMeta>,
}

impl GraphDictionary {
    pub fn node_count(&self) -> usize {
        self.psi.nrows()
    }

    /// Number of atoms `m`.
    pub fn atom_count(&self) -> usize {
        self.psi.ncols()
    }

    /// `‖ΨᵀΨ − I‖_max`.
    pub fn orthonormality_residual(&self) -> f64 {
        crate::linalg::gram_identity_residual(&self.psi)
    }

    pub(crate) fn assert_valid(&self) {
        assert_eq!(self.atom_meta.len(), self.atom_count());
        assert!(self.atom_count() <= self.node_count());
        if self.orthonormal_columns {
            let r = self.orthonormality_residual();
            assert!(
                r <= ORTHONORMALITY_TOL,
                "graph dictionary flagged orthonormal but residual is {r:e}"
            );
        }
    }
}

/// Fixed time dictionary `Φ ∈ R^{s×t}` with atoms as rows.
#[derive(Debug, Clone)]
pub struct TimeDictionary {
    pub phi: DMatrix<f64>,
    pub kind: TimeDictionaryKind,
    pub orthonormal_rows: bool,
    pub atom_meta: Vec<TimeAtomMeta>,
}

impl TimeDictionary {
    /// Number of atoms `s`.
    pub fn atom_count(&self) -> usize {
        self.phi.nrows()
    }

    pub fn time_len(&self) -> usize {
        self.phi.ncols()
    }

    /// `‖ΦΦᵀ − I‖_max`.
    pub fn orthonormality_residual(&self) -> f64 {
        crate::linalg::gram_identity_residual(&self.phi.transpose())
    }

    pub(crate) fn assert_valid(&self) {
        assert_eq!(self.atom_meta.len(), self.atom_count());
        if self.orthonormal_rows {
            let r = self.orthonormality_residual();
            assert!(
                r <= ORTHONORMALITY_TOL,
                "time dictionary flagged orthonormal but residual is {r:e}"
            );
        }
    }

    /// Period metadata of atom `i`, if this is a Ramanujan dictionary.
    pub fn atom_period(&self, i: usize) -> Option<usize> {
        match self.atom_meta.get(i) {
            Some(TimeAtomMeta::Ramanujan { period, .. }) => Some(*period),
            _ => None,
        }
    }
}
