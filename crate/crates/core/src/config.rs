//! Run configuration: a JSON file with `solver`, `psi`, `phi`, `task`, and
//! `synth` sections, all optional, with unknown keys rejected. Command-line
//! flags override file values after parsing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dict::{GraphDictionaryKind, TimeDictionaryKind};
use crate::solver::SolverConfig;
use crate::synth::SynthSpec;
use crate::tasks::MaskKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key at {path}: {message}")]
    UnknownKey { path: String, message: String },
    #[error("type error at {path}: {message}")]
    TypeError { path: String, message: String },
    #[error("invalid value at {path}: {message}")]
    RangeError { path: String, message: String },
    #[error("malformed config: {0}")]
    Malformed(String),
}

/// Graph dictionary selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiSpec {
    pub kind: GraphDictionaryKind,
    /// Fraction of lowest-frequency atoms kept (GFT only).
    pub fraction: f64,
}

impl Default for PsiSpec {
    fn default() -> Self {
        Self {
            kind: GraphDictionaryKind::Gft,
            fraction: 1.0,
        }
    }
}

/// Time dictionary selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiSpec {
    pub kind: TimeDictionaryKind,
    /// Largest modeled period (Ramanujan only).
    pub g_max: usize,
    /// Drop exact-duplicate atom rows (Ramanujan only).
    pub dedup: bool,
    /// Basis count (spline only).
    pub n_basis: usize,
    /// Spline degree.
    pub degree: usize,
}

impl Default for PhiSpec {
    fn default() -> Self {
        Self {
            kind: TimeDictionaryKind::Ramanujan,
            g_max: 10,
            dedup: false,
            n_basis: 10,
            degree: 3,
        }
    }
}

/// Task-level knobs shared by the evaluation subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub missing_fraction: f64,
    pub mask: MaskKind,
    /// Seeds averaged over when a subcommand generates its own masks.
    pub mask_seeds: Vec<u64>,
    /// Cluster count for the clustering task.
    pub clusters: usize,
    pub kmeans_restarts: usize,
    /// Candidate ranks for rank estimation.
    pub rank_grid: Vec<usize>,
    pub folds: usize,
    /// Period-penalty exponent; 0 disables the penalty.
    pub period_exponent: f64,
    /// How many leading periods a period report keeps.
    pub top_periods: usize,
    /// Magnitude below which a coefficient counts as zero.
    pub zero_threshold: f64,
    /// Sparsity grid swept by the bench subcommand.
    pub bench_lambdas: Vec<f64>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            missing_fraction: 0.25,
            mask: MaskKind::Random,
            mask_seeds: vec![0, 1, 2, 3, 4],
            clusters: 7,
            kmeans_restarts: 10,
            rank_grid: vec![3, 5, 7, 9, 11],
            folds: 5,
            period_exponent: 2.0,
            top_periods: 3,
            zero_threshold: 0.0,
            bench_lambdas: vec![0.001, 0.01, 0.1, 1.0],
        }
    }
}

/// Everything a run needs beyond file paths (those are command-line
/// arguments).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub psi: PsiSpec,
    pub phi: PhiSpec,
    pub task: TaskConfig,
    pub synth: SynthSpec,
}

/// Parse a JSON config, rejecting unknown keys and out-of-range values with
/// the offending key path. An empty document yields the full defaults.
pub fn parse_config(json: &str) -> Result<RunConfig, ConfigError> {
    let trimmed = json.trim();
    let config: RunConfig = if trimmed.is_empty() {
        RunConfig::default()
    } else {
        let mut de = serde_json::Deserializer::from_str(trimmed);
        serde_path_to_error::deserialize(&mut de).map_err(classify_serde)?
    };
    config.validate()?;
    Ok(config)
}

fn classify_serde(err: serde_path_to_error::Error<serde_json::Error>) -> ConfigError {
    let path = err.path().to_string();
    let message = err.inner().to_string();
    if message.starts_with("unknown field") {
        ConfigError::UnknownKey { path, message }
    } else if message.starts_with("invalid type") || message.starts_with("expected") {
        ConfigError::TypeError { path, message }
    } else if message.starts_with("invalid value") {
        ConfigError::RangeError { path, message }
    } else {
        ConfigError::Malformed(format!("{path}: {message}"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |path: &str, message: String| {
            Err(ConfigError::RangeError {
                path: path.to_string(),
                message,
            })
        };
        let s = &self.solver;
        if !(s.lambda1 >= 0.0) {
            return range("solver.lambda1", format!("must be >= 0, got {}", s.lambda1));
        }
        if !(s.lambda2 >= 0.0) {
            return range("solver.lambda2", format!("must be >= 0, got {}", s.lambda2));
        }
        if !(s.lambda3 >= 0.0) {
            return range("solver.lambda3", format!("must be >= 0, got {}", s.lambda3));
        }
        if !(s.rho1 > 0.0) {
            return range("solver.rho1", format!("must be > 0, got {}", s.rho1));
        }
        if !(s.rho2 > 0.0) {
            return range("solver.rho2", format!("must be > 0, got {}", s.rho2));
        }
        if s.k == 0 {
            return range("solver.k", "must be >= 1".into());
        }
        if !(s.epsilon > 0.0) {
            return range("solver.epsilon", format!("must be > 0, got {}", s.epsilon));
        }
        if s.max_iter == 0 {
            return range("solver.max_iter", "must be >= 1".into());
        }
        if !(self.psi.fraction > 0.0 && self.psi.fraction <= 1.0) {
            return range(
                "psi.fraction",
                format!("must be in (0, 1], got {}", self.psi.fraction),
            );
        }
        if self.phi.g_max == 0 {
            return range("phi.g_max", "must be >= 1".into());
        }
        if self.phi.n_basis < self.phi.degree + 1 {
            return range(
                "phi.n_basis",
                format!(
                    "must be >= degree + 1 = {}, got {}",
                    self.phi.degree + 1,
                    self.phi.n_basis
                ),
            );
        }
        if !(0.0..1.0).contains(&self.task.missing_fraction) {
            return range(
                "task.missing_fraction",
                format!("must be in [0, 1), got {}", self.task.missing_fraction),
            );
        }
        if self.task.clusters == 0 {
            return range("task.clusters", "must be >= 1".into());
        }
        if self.task.kmeans_restarts == 0 {
            return range("task.kmeans_restarts", "must be >= 1".into());
        }
        if self.task.rank_grid.is_empty() || self.task.rank_grid.contains(&0) {
            return range("task.rank_grid", "must be nonempty with ranks >= 1".into());
        }
        if self.task.folds < 2 {
            return range("task.folds", format!("must be >= 2, got {}", self.task.folds));
        }
        if self.task.mask_seeds.is_empty() {
            return range("task.mask_seeds", "must list at least one seed".into());
        }
        if !(self.task.zero_threshold >= 0.0) {
            return range(
                "task.zero_threshold",
                format!("must be >= 0, got {}", self.task.zero_threshold),
            );
        }
        if self.task.top_periods == 0 {
            return range("task.top_periods", "must be >= 1".into());
        }
        if let Err(msg) = self.synth.validate() {
            return range("synth", msg);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_defaults() {
        let config = parse_config("").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(parse_config("{}").unwrap(), RunConfig::default());
        assert_eq!(config.solver.rho1, 1.0);
        assert_eq!(config.solver.epsilon, 1e-7);
        assert_eq!(config.solver.max_iter, 500);
        assert_eq!(config.solver.lambda3, 10.0);
    }

    #[test]
    fn negative_k_is_a_range_error_at_the_key_path() {
        let err = parse_config(r#"{"solver":{"k":-1}}"#).unwrap_err();
        match err {
            ConfigError::RangeError { path, .. } | ConfigError::TypeError { path, .. } => {
                assert_eq!(path, "solver.k");
            }
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_config(r#"{"solver":{"k":0}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::RangeError { path, .. } if path == "solver.k"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = parse_config(r#"{"solver":{"lambda9":1}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { path, .. } if path == "solver.lambda9"));
        let err = parse_config(r#"{"bogus_section":{}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { path, .. } if path == "bogus_section"));
    }

    #[test]
    fn type_errors_carry_the_key_path() {
        let err = parse_config(r#"{"solver":{"lambda1":"big"}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::TypeError { path, .. } if path == "solver.lambda1"));
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let config = parse_config(r#"{"solver":{"lambda1":0.5},"phi":{"kind":"spline"}}"#).unwrap();
        assert_eq!(config.solver.lambda1, 0.5);
        assert_eq!(config.solver.lambda2, SolverConfig::default().lambda2);
        assert_eq!(config.phi.kind, TimeDictionaryKind::Spline);
        assert_eq!(config.phi.g_max, 10);
    }

    #[test]
    fn semantic_range_checks_cover_sections() {
        for (doc, path) in [
            (r#"{"psi":{"fraction":0.0}}"#, "psi.fraction"),
            (r#"{"psi":{"fraction":1.5}}"#, "psi.fraction"),
            (r#"{"task":{"missing_fraction":1.0}}"#, "task.missing_fraction"),
            (r#"{"task":{"folds":1}}"#, "task.folds"),
            (r#"{"task":{"rank_grid":[]}}"#, "task.rank_grid"),
            (r#"{"phi":{"n_basis":2,"degree":3}}"#, "phi.n_basis"),
            (r#"{"solver":{"rho1":0.0}}"#, "solver.rho1"),
        ] {
            let err = parse_config(doc).unwrap_err();
            assert!(
                matches!(&err, ConfigError::RangeError { path: p, .. } if p == path),
                "{doc} -> {err:?}"
            );
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = RunConfig {
            solver: SolverConfig {
                lambda1: 0.25,
                k: 3,
                ..SolverConfig::default()
            },
            ..RunConfig::default()
        };
        let json = serde_json::to_string_pretty(&config).unwrap();
        assert_eq!(parse_config(&json).unwrap(), config);
    }
}
