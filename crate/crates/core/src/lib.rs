//! Temporal graph signal decomposition.
//!
//! Encodes a node×time signal matrix `X` as `Ψ Y W Φ`: a fixed graph
//! dictionary `Ψ`, two learned sparse coefficient matrices `Y` and `W`, and
//! a fixed time dictionary `Φ`. The coefficients are fit by ADMM, with or
//! without missing values, and feed the downstream tasks: imputation,
//! temporal interpolation, node clustering, period detection, and rank
//! estimation by element-wise cross-validation.

pub mod config;
pub mod dict;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod solver;
pub mod synth;
pub mod tasks;

pub use dict::{GraphDictionary, TimeDictionary};
pub use graph::Graph;
pub use solver::{fit, DecompositionModel, MaskedSignal, SolverConfig};
