//! ADMM solver for the joint sparse decomposition `X ≈ Ψ Y W Φ`.
//!
//! The objective splits the fit against a working copy `D` of the data from
//! the sparsity terms on proximal copies `Z`, `V` of the coefficients:
//!
//! ```text
//! ‖D − Ψ Y W Φ‖_F² + λ1‖Z‖₁ + λ2‖V‖₁ + λ3‖Ω ⊙ (D − X)‖_F²
//!     s.t. Y = Z, W = V
//! ```
//!
//! Each iteration updates `D` (elementwise blend of model and observed
//! data), `Y` and `W` (ridge-regularized least squares, with a closed form
//! when the corresponding dictionary is orthonormal and an eigendecomposition
//! route otherwise), then soft-thresholds `Z`, `V` and steps the duals. With
//! a fully observed mask the `D` update is skipped and `D ≡ X` throughout.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dict::{GraphDictionary, TimeDictionary};
use crate::linalg;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask entry {value} at ({row}, {col}) is not 0 or 1")]
    InvalidMask { row: usize, col: usize, value: f64 },
    #[error("matrix is not symmetric: max asymmetry {0:e}")]
    AsymmetricInput(f64),
    #[error("penalty rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("non-finite values encountered at iteration {iteration}")]
    NonFinite { iteration: usize },
}

/// Signal matrix `X` (n×t) with a binary observation mask `Ω` of the same
/// shape. Unobserved entries of `X` are stored as exact zeros.
#[derive(Debug, Clone)]
pub struct MaskedSignal {
    x: DMatrix<f64>,
    omega: DMatrix<f64>,
}

impl MaskedSignal {
    /// Build a masked signal, zeroing `x` wherever `omega` is 0.
    pub fn new(mut x: DMatrix<f64>, omega: DMatrix<f64>) -> Result<Self, SolverError> {
        if x.shape() != omega.shape() {
            return Err(SolverError::ShapeMismatch(format!(
                "signal is {:?} but mask is {:?}",
                x.shape(),
                omega.shape()
            )));
        }
        for col in 0..omega.ncols() {
            for row in 0..omega.nrows() {
                let v = omega[(row, col)];
                if v != 0.0 && v != 1.0 {
                    return Err(SolverError::InvalidMask { row, col, value: v });
                }
                if v == 0.0 {
                    x[(row, col)] = 0.0;
                }
            }
        }
        Ok(Self { x, omega })
    }

    pub fn fully_observed(x: DMatrix<f64>) -> Self {
        let omega = DMatrix::from_element(x.nrows(), x.ncols(), 1.0);
        Self { x, omega }
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn shape(&self) -> (usize, usize) {
        self.x.shape()
    }

    pub fn observed_count(&self) -> usize {
        self.omega.iter().filter(|&&v| v == 1.0).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.omega.iter().all(|&v| v == 1.0)
    }

    /// Positions (row, col) of observed entries in column-major order.
    pub fn observed_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.observed_count());
        for col in 0..self.omega.ncols() {
            for row in 0..self.omega.nrows() {
                if self.omega[(row, col)] == 1.0 {
                    out.push((row, col));
                }
            }
        }
        out
    }
}

/// Hyperparameters of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Sparsity weight on the graph-side coefficients `Z`.
    pub lambda1: f64,
    /// Sparsity weight on the time-side coefficients `V`.
    pub lambda2: f64,
    /// Weight tying `D` to the observed entries of `X`.
    pub lambda3: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// Internal rank of the encoding.
    pub k: usize,
    /// Absolute tolerance on the objective change between iterations.
    pub epsilon: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.1,
            lambda3: 10.0,
            rho1: 1.0,
            rho2: 1.0,
            k: 7,
            epsilon: 1e-7,
            max_iter: 500,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.lambda1 >= 0.0) {
            return bad(format!("lambda1 must be >= 0, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0) {
            return bad(format!("lambda2 must be >= 0, got {}", self.lambda2));
        }
        if !(self.lambda3 >= 0.0) {
            return bad(format!("lambda3 must be >= 0, got {}", self.lambda3));
        }
        if !(self.rho1 > 0.0) {
            return bad(format!("rho1 must be > 0, got {}", self.rho1));
        }
        if !(self.rho2 > 0.0) {
            return bad(format!("rho2 must be > 0, got {}", self.rho2));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        Ok(())
    }
}

/// Result of a solver run: sparse coefficients, the ADMM state at the last
/// iteration, and the convergence trace.
#[derive(Debug, Clone)]
pub struct DecompositionModel {
    /// Final graph-side coefficients (m×k): the soft-thresholded copy `Z`.
    pub y: DMatrix<f64>,
    /// Final time-side coefficients (k×s): the soft-thresholded copy `V`.
    pub w: DMatrix<f64>,
    /// Last dense ADMM iterate of `Y`, before sparsification.
    pub y_dense: DMatrix<f64>,
    /// Last dense ADMM iterate of `W`, before sparsification.
    pub w_dense: DMatrix<f64>,
    pub gamma1: DMatrix<f64>,
    pub gamma2: DMatrix<f64>,
    /// Working copy of the data at the last iteration (`== X` when fully
    /// observed).
    pub d: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the end of each iteration.
    pub objective_trace: Vec<f64>,
    /// `(‖Z − Y‖_F, ‖V − W‖_F)` at the end of each iteration.
    pub primal_trace: Vec<(f64, f64)>,
    /// Largest stationarity residual of the `Y`/`W` updates over the run.
    pub max_stationarity_residual: f64,
    pub psi: Arc<GraphDictionary>,
    pub phi: Arc<TimeDictionary>,
    pub config: SolverConfig,
}

impl DecompositionModel {
    /// `Ψ · Y · W · Φ` from the final sparse coefficients.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        (&self.psi.psi * &self.y) * (&self.w * &self.phi.phi)
    }

    /// `Ψ · Y · W · Φ` from the dense pre-threshold iterates.
    pub fn reconstruct_dense(&self) -> DMatrix<f64> {
        (&self.psi.psi * &self.y_dense) * (&self.w_dense * &self.phi.phi)
    }
}

/// Elementwise soft threshold `sign(m)·max(|m|−tau, 0)`.
pub fn shrink(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    assert!(tau >= 0.0, "threshold must be nonnegative");
    m.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// Closed-form `D` update: `D_ij = (P_ij + λ3·Ω_ij·X_ij) / (1 + λ3·Ω_ij)`.
///
/// Unobserved entries follow the model `P`; observed entries blend the model
/// with the data, approaching `X` as `λ3` grows.
pub fn update_d(
    p: &DMatrix<f64>,
    x: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    lambda3: f64,
) -> DMatrix<f64> {
    assert_eq!(p.shape(), x.shape());
    assert_eq!(p.shape(), omega.shape());
    assert!(lambda3 >= 0.0);
    let mut d = p.clone();
    for col in 0..d.ncols() {
        for row in 0..d.nrows() {
            let o = omega[(row, col)];
            d[(row, col)] = (p[(row, col)] + lambda3 * o * x[(row, col)]) / (1.0 + lambda3 * o);
        }
    }
    d
}

#[derive(Debug, Clone)]
struct SymEig {
    q: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn sym_eig(m: &DMatrix<f64>) -> SymEig {
    let (lambda, q) = linalg::sym_eigen_ascending(m);
    SymEig { q, lambda }
}

/// Solve `2·M·X·N + ρ·X = Π` given eigendecompositions of `M` and `N`.
fn sylvester_from_eigs(a: &SymEig, b: &SymEig, pi: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let mut e = a.q.transpose() * pi * &b.q;
    for j in 0..e.ncols() {
        for i in 0..e.nrows() {
            e[(i, j)] /= 2.0 * a.lambda[i] * b.lambda[j] + rho;
        }
    }
    &a.q * e * b.q.transpose()
}

/// Unique solution of `2·M·X·N + ρ·X = Π` for symmetric PSD `M` (p×p) and
/// `N` (q×q), via their eigendecompositions. With `ρ > 0` every denominator
/// `2·λᴹᵢ·λᴺⱼ + ρ` is positive, so the solve is well posed.
pub fn solve_regularized_sylvester(
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    rho: f64,
) -> Result<DMatrix<f64>, SolverError> {
    if rho <= 0.0 {
        return Err(SolverError::NonPositiveRho(rho));
    }
    for (name, mat) in [("M", m), ("N", n)] {
        if mat.nrows() != mat.ncols() {
            return Err(SolverError::ShapeMismatch(format!(
                "{name} must be square, got {:?}",
                mat.shape()
            )));
        }
        let asym = linalg::max_abs(&(mat - mat.transpose()));
        if asym > 1e-8 {
            return Err(SolverError::AsymmetricInput(asym));
        }
    }
    if pi.nrows() != m.nrows() || pi.ncols() != n.nrows() {
        return Err(SolverError::ShapeMismatch(format!(
            "Pi is {:?} but M is {:?} and N is {:?}",
            pi.shape(),
            m.shape(),
            n.shape()
        )));
    }
    Ok(sylvester_from_eigs(&sym_eig(m), &sym_eig(n), pi, rho))
}

/// `X = Π·(2·NN + ρI)⁻¹` via Cholesky (right ridge solve).
fn solve_ridge_right(pi: &DMatrix<f64>, nn: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let k = nn.nrows();
    let sys = nn * 2.0 + DMatrix::identity(k, k) * rho;
    let chol = sys
        .cholesky()
        .expect("2·NNᵀ + ρI is symmetric positive definite");
    chol.solve(&pi.transpose()).transpose()
}

/// `X = (2·MM + ρI)⁻¹·Π` via Cholesky (left ridge solve).
fn solve_ridge_left(mm: &DMatrix<f64>, pi: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let k = mm.nrows();
    let sys = mm * 2.0 + DMatrix::identity(k, k) * rho;
    let chol = sys
        .cholesky()
        .expect("2·MᵀM + ρI is symmetric positive definite");
    chol.solve(pi)
}

fn right_hand_side_y(
    d: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    b: &DMatrix<f64>,
    z: &DMatrix<f64>,
    gamma1: &DMatrix<f64>,
    rho1: f64,
) -> DMatrix<f64> {
    (psi.transpose() * d * b.transpose()) * 2.0 + z * rho1 + gamma1
}

fn right_hand_side_w(
    d: &DMatrix<f64>,
    a: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    v: &DMatrix<f64>,
    gamma2: &DMatrix<f64>,
    rho2: f64,
) -> DMatrix<f64> {
    (a.transpose() * d * phi.transpose()) * 2.0 + v * rho2 + gamma2
}

/// Solve the `Y` stationarity condition `2ΨᵀΨ·Y·BBᵀ + ρ1·Y = Π1` with
/// `Π1 = 2ΨᵀDBᵀ + ρ1·Z + Γ1` and `B = WΦ` precomputed.
///
/// With orthonormal `Ψ` columns this is the closed form
/// `Y = Π1·(2BBᵀ + ρ1 I)⁻¹`; otherwise the eigendecomposition route.
pub fn update_y(
    d: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    b: &DMatrix<f64>,
    z: &DMatrix<f64>,
    gamma1: &DMatrix<f64>,
    rho1: f64,
    orthogonal: bool,
) -> Result<DMatrix<f64>, SolverError> {
    let (n, m) = psi.shape();
    let (k, t) = b.shape();
    if d.shape() != (n, t) || z.shape() != (m, k) || gamma1.shape() != (m, k) {
        return Err(SolverError::ShapeMismatch(format!(
            "update_y: psi {:?}, b {:?}, d {:?}, z {:?}, gamma1 {:?}",
            psi.shape(),
            b.shape(),
            d.shape(),
            z.shape(),
            gamma1.shape()
        )));
    }
    if rho1 <= 0.0 {
        return Err(SolverError::NonPositiveRho(rho1));
    }
    debug_assert!(
        !orthogonal || linalg::gram_identity_residual(psi) <= 1e-6,
        "psi flagged orthogonal but ΨᵀΨ is far from I"
    );
    let pi1 = right_hand_side_y(d, psi, b, z, gamma1, rho1);
    let bbt = b * b.transpose();
    if orthogonal {
        Ok(solve_ridge_right(&pi1, &bbt, rho1))
    } else {
        solve_regularized_sylvester(&(psi.transpose() * psi), &bbt, &pi1, rho1)
    }
}

/// Solve the `W` stationarity condition `2AᵀA·W·ΦΦᵀ + ρ2·W = Π2` with
/// `Π2 = 2AᵀDΦᵀ + ρ2·V + Γ2` and `A = ΨY` precomputed. The data term uses
/// `D`, not `X`: with missing values the zero-filled holes of `X` must not
/// pull on the coefficients.
pub fn update_w(
    d: &DMatrix<f64>,
    a: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    v: &DMatrix<f64>,
    gamma2: &DMatrix<f64>,
    rho2: f64,
    orthogonal: bool,
) -> Result<DMatrix<f64>, SolverError> {
    let (n, k) = a.shape();
    let (s, t) = phi.shape();
    if d.shape() != (n, t) || v.shape() != (k, s) || gamma2.shape() != (k, s) {
        return Err(SolverError::ShapeMismatch(format!(
            "update_w: a {:?}, phi {:?}, d {:?}, v {:?}, gamma2 {:?}",
            a.shape(),
            phi.shape(),
            d.shape(),
            v.shape(),
            gamma2.shape()
        )));
    }
    if rho2 <= 0.0 {
        return Err(SolverError::NonPositiveRho(rho2));
    }
    debug_assert!(
        !orthogonal || linalg::gram_identity_residual(&phi.transpose()) <= 1e-6,
        "phi flagged orthogonal but ΦΦᵀ is far from I"
    );
    let pi2 = right_hand_side_w(d, a, phi, v, gamma2, rho2);
    let ata = a.transpose() * a;
    if orthogonal {
        Ok(solve_ridge_left(&ata, &pi2, rho2))
    } else {
        solve_regularized_sylvester(&ata, &(phi * phi.transpose()), &pi2, rho2)
    }
}

/// Max-norm of `2·G·X·N + ρ·X − Π`: how far `X` is from the update's
/// zero-gradient condition.
fn stationarity_residual(
    gram: &DMatrix<f64>,
    x: &DMatrix<f64>,
    nn: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    rho: f64,
) -> f64 {
    let lhs = (gram * x * nn) * 2.0 + x * rho;
    linalg::max_abs(&(lhs - pi))
}

fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

fn objective_from_parts(
    d: &DMatrix<f64>,
    recon: &DMatrix<f64>,
    z: &DMatrix<f64>,
    v: &DMatrix<f64>,
    signal: &MaskedSignal,
    config: &SolverConfig,
) -> f64 {
    let fit = (d - recon).norm_squared();
    let mask_fit: f64 = signal
        .omega
        .iter()
        .zip(d.iter().zip(signal.x.iter()))
        .map(|(&o, (&di, &xi))| o * (di - xi) * (di - xi))
        .sum();
    fit + config.lambda1 * l1_norm(z) + config.lambda2 * l1_norm(v) + config.lambda3 * mask_fit
}

/// Objective of the split problem at the model's stored state: the fit term
/// uses the dense iterates, the ℓ1 terms the sparse copies.
pub fn objective(model: &DecompositionModel, signal: &MaskedSignal, config: &SolverConfig) -> f64 {
    objective_from_parts(
        &model.d,
        &model.reconstruct_dense(),
        &model.y,
        &model.w,
        signal,
        config,
    )
}

/// Run the ADMM loop until the objective change falls below
/// `config.epsilon` or `config.max_iter` is reached.
///
/// `Y`, `Z`, `W`, `V` start as all-ones, the duals as zeros. The returned
/// model carries the soft-thresholded copies as its coefficients, so zero
/// counts on `model.y`/`model.w` reflect the ℓ1-thresholded encoding.
pub fn fit(
    signal: &MaskedSignal,
    psi: Arc<GraphDictionary>,
    phi: Arc<TimeDictionary>,
    config: &SolverConfig,
) -> Result<DecompositionModel, SolverError> {
    config.validate()?;
    let (n, t) = signal.shape();
    if psi.node_count() != n {
        return Err(SolverError::ShapeMismatch(format!(
            "graph dictionary has {} rows but signal has {} rows",
            psi.node_count(),
            n
        )));
    }
    if phi.time_len() != t {
        return Err(SolverError::ShapeMismatch(format!(
            "time dictionary has {} columns but signal has {} columns",
            phi.time_len(),
            t
        )));
    }

    let m = psi.atom_count();
    let s = phi.atom_count();
    let k = config.k;
    let psi_mat = &psi.psi;
    let phi_mat = &phi.phi;
    let fully_observed = signal.is_fully_observed();
    let x = signal.x();

    // Fixed grams. Eigendecompositions are reused across iterations; only
    // the small k×k grams change and are refactored each pass.
    let psi_gram = psi_mat.transpose() * psi_mat;
    let phi_gram = phi_mat * phi_mat.transpose();
    let psi_eig = (!psi.orthonormal_columns).then(|| sym_eig(&psi_gram));
    let phi_eig = (!phi.orthonormal_rows).then(|| sym_eig(&phi_gram));

    let mut y = DMatrix::from_element(m, k, 1.0);
    let mut z = y.clone();
    let mut w = DMatrix::from_element(k, s, 1.0);
    let mut v = w.clone();
    let mut gamma1 = DMatrix::zeros(m, k);
    let mut gamma2 = DMatrix::zeros(k, s);
    let mut d = x.clone();

    let mut a = psi_mat * &y;
    let mut b = &w * phi_mat;

    let mut trace: Vec<f64> = Vec::new();
    let mut primal_trace: Vec<(f64, f64)> = Vec::new();
    let mut max_residual = 0.0_f64;
    let mut prev_objective = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 1..=config.max_iter {
        iterations = iteration;
        let p = &a * &b;
        if !linalg::all_finite(&p) {
            return Err(SolverError::NonFinite { iteration });
        }
        if !fully_observed {
            d = update_d(&p, x, signal.omega(), config.lambda3);
        }

        let bbt = &b * b.transpose();
        let pi1 = right_hand_side_y(&d, psi_mat, &b, &z, &gamma1, config.rho1);
        y = match &psi_eig {
            None => solve_ridge_right(&pi1, &bbt, config.rho1),
            Some(eig) => sylvester_from_eigs(eig, &sym_eig(&bbt), &pi1, config.rho1),
        };
        max_residual = max_residual.max(stationarity_residual(
            &psi_gram,
            &y,
            &bbt,
            &pi1,
            config.rho1,
        ));
        a = psi_mat * &y;

        let ata = a.transpose() * &a;
        let pi2 = right_hand_side_w(&d, &a, phi_mat, &v, &gamma2, config.rho2);
        w = match &phi_eig {
            None => solve_ridge_left(&ata, &pi2, config.rho2),
            Some(eig) => sylvester_from_eigs(&sym_eig(&ata), eig, &pi2, config.rho2),
        };
        max_residual = max_residual.max(stationarity_residual(
            &ata,
            &w,
            &phi_gram,
            &pi2,
            config.rho2,
        ));
        b = &w * phi_mat;

        v = shrink(&(&w - &gamma2 / config.rho2), config.lambda2 / config.rho2);
        z = shrink(&(&y - &gamma1 / config.rho1), config.lambda1 / config.rho1);
        gamma1 += (&z - &y) * config.rho1;
        gamma2 += (&v - &w) * config.rho2;

        let recon = &a * &b;
        let f = objective_from_parts(&d, &recon, &z, &v, signal, config);
        if !f.is_finite() {
            return Err(SolverError::NonFinite { iteration });
        }
        trace.push(f);
        primal_trace.push(((&z - &y).norm(), (&v - &w).norm()));

        if (f - prev_objective).abs() <= config.epsilon {
            converged = true;
            break;
        }
        prev_objective = f;
    }

    Ok(DecompositionModel {
        y: z.clone(),
        w: v.clone(),
        y_dense: y,
        w_dense: w,
        gamma1,
        gamma2,
        d,
        iterations,
        converged,
        objective_trace: trace,
        primal_trace,
        max_stationarity_residual: max_residual,
        psi,
        phi,
        config: config.clone(),
    })
}
