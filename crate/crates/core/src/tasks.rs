//! Downstream tasks on a fitted decomposition: mask generation, imputation
//! and interpolation scoring, model-size accounting, clustering embeddings,
//! period detection, and rank estimation by element-wise cross-validation.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use pathfinding::matrix::Matrix as PfMatrix;
use pathfinding::prelude::kuhn_munkres;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dict::{GraphDictionary, TimeDictionary, TimeDictionaryKind};
use crate::solver::{fit, DecompositionModel, MaskedSignal, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("mask has no observed entries")]
    EmptyMask,
    #[error("missing fraction {0} outside [0, 1)")]
    BadFraction(f64),
    #[error("k = {k} exceeds point count {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("label vectors have different lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("expected a {expected:?} time dictionary, got {got:?}")]
    WrongDictionaryKind {
        expected: TimeDictionaryKind,
        got: TimeDictionaryKind,
    },
    #[error("need at least {needed} observed entries, got {got}")]
    NotEnoughObserved { needed: usize, got: usize },
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Evaluation summary for one fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Reconstruction RMSE over observed entries.
    pub rmse_observed: f64,
    /// RMSE over held-out entries, when ground truth was available.
    pub rmse_heldout: Option<f64>,
    pub nnz_y: usize,
    pub nnz_w: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Wall-clock fit time. Excluded from serialized reports so output
    /// files stay byte-identical across reruns.
    #[serde(skip)]
    pub runtime_ms: u128,
    pub config: SolverConfig,
}

/// Period-detection scores: energy of the periodic coefficient matrix per
/// modeled period, penalized by period length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodReport {
    pub strengths: BTreeMap<usize, f64>,
    /// Periods ranked by descending strength, ties broken by smaller period.
    pub top_periods: Vec<usize>,
}

/// Which entries a generated evaluation mask removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    /// Individual entries, uniformly at random.
    Random,
    /// Whole time columns.
    Column,
}

/// Binary mask with exactly `⌊fraction·n·t⌋` zeros placed uniformly at
/// random without replacement; deterministic per seed.
pub fn make_random_mask(
    n: usize,
    t: usize,
    missing_fraction: f64,
    seed: u64,
) -> Result<DMatrix<f64>, TaskError> {
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(TaskError::BadFraction(missing_fraction));
    }
    let total = n * t;
    let zeros = (missing_fraction * total as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = DMatrix::from_element(n, t, 1.0);
    for idx in sample(&mut rng, total, zeros) {
        mask[(idx % n, idx / n)] = 0.0;
    }
    Ok(mask)
}

/// Binary mask zeroing `⌊fraction·t⌋` whole columns, chosen uniformly
/// without replacement; deterministic per seed.
pub fn make_column_mask(
    n: usize,
    t: usize,
    missing_fraction: f64,
    seed: u64,
) -> Result<DMatrix<f64>, TaskError> {
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(TaskError::BadFraction(missing_fraction));
    }
    let zero_cols = (missing_fraction * t as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = DMatrix::from_element(n, t, 1.0);
    for col in sample(&mut rng, t, zero_cols) {
        for row in 0..n {
            mask[(row, col)] = 0.0;
        }
    }
    Ok(mask)
}

pub fn make_mask(
    kind: MaskKind,
    n: usize,
    t: usize,
    missing_fraction: f64,
    seed: u64,
) -> Result<DMatrix<f64>, TaskError> {
    match kind {
        MaskKind::Random => make_random_mask(n, t, missing_fraction, seed),
        MaskKind::Column => make_column_mask(n, t, missing_fraction, seed),
    }
}

/// Root mean squared difference between `a` and `b` over the mask's ones.
pub fn rmse(a: &DMatrix<f64>, b: &DMatrix<f64>, mask: &DMatrix<f64>) -> Result<f64, TaskError> {
    assert_eq!(a.shape(), b.shape());
    assert_eq!(a.shape(), mask.shape());
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((&ai, &bi), &mi) in a.iter().zip(b.iter()).zip(mask.iter()) {
        if mi == 1.0 {
            sum += (ai - bi) * (ai - bi);
            count += 1;
        }
    }
    if count == 0 {
        return Err(TaskError::EmptyMask);
    }
    Ok((sum / count as f64).sqrt())
}

/// Count of entries with magnitude above `zero_threshold`.
pub fn nnz(m: &DMatrix<f64>, zero_threshold: f64) -> usize {
    assert!(zero_threshold >= 0.0);
    m.iter().filter(|v| v.abs() > zero_threshold).count()
}

/// Fill every unobserved entry with the global mean of the observed ones.
pub fn mean_impute(signal: &MaskedSignal) -> DMatrix<f64> {
    let observed = signal.observed_count();
    let mean = if observed == 0 {
        0.0
    } else {
        signal.x().sum() / observed as f64
    };
    let mut out = signal.x().clone();
    for (o, v) in signal.omega().iter().zip(out.iter_mut()) {
        if *o == 0.0 {
            *v = mean;
        }
    }
    out
}

/// Mean-fill the holes, then project onto the best rank-`rank`
/// approximation via a truncated SVD.
pub fn svd_impute(signal: &MaskedSignal, rank: usize) -> DMatrix<f64> {
    let filled = mean_impute(signal);
    truncated_svd(&filled, rank)
}

/// Best rank-`rank` approximation of `m` by singular value truncation.
pub fn truncated_svd(m: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors");
    let vt = svd.v_t.as_ref().expect("right singular vectors");
    let r = rank.min(svd.singular_values.len());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &idx in order.iter().take(r) {
        out += u.column(idx) * vt.row(idx) * svd.singular_values[idx];
    }
    out
}

/// Fit the decomposition and fill unobserved entries from the model:
/// `filled = Ω⊙X + (1−Ω)⊙(ΨYWΦ)`. Observed entries pass through
/// untouched. `truth`, when given, scores the fill on the held-out entries.
pub fn impute(
    signal: &MaskedSignal,
    psi: Arc<GraphDictionary>,
    phi: Arc<TimeDictionary>,
    config: &SolverConfig,
    truth: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, EvalReport, DecompositionModel), TaskError> {
    let start = Instant::now();
    let model = fit(signal, psi, phi, config)?;
    let runtime_ms = start.elapsed().as_millis();
    let recon = model.reconstruct();
    let mut filled = signal.x().clone();
    for ((f, &r), &o) in filled.iter_mut().zip(recon.iter()).zip(signal.omega().iter()) {
        if o == 0.0 {
            *f = r;
        }
    }
    let heldout_mask = signal.omega().map(|o| 1.0 - o);
    let rmse_heldout = match truth {
        Some(t) if signal.observed_count() < t.len() => Some(rmse(&filled, t, &heldout_mask)?),
        _ => None,
    };
    let report = EvalReport {
        rmse_observed: rmse(&recon, signal.x(), signal.omega())?,
        rmse_heldout,
        nnz_y: nnz(&model.y, 0.0),
        nnz_w: nnz(&model.w, 0.0),
        iterations: model.iterations,
        converged: model.converged,
        runtime_ms,
        config: config.clone(),
    };
    Ok((filled, report, model))
}

/// Mask a complete signal with `kind`/`fraction` under each seed, impute,
/// and score against the complete signal. Jobs run in parallel; results
/// come back in seed order.
pub fn heldout_eval(
    x_full: &DMatrix<f64>,
    psi: &Arc<GraphDictionary>,
    phi: &Arc<TimeDictionary>,
    config: &SolverConfig,
    kind: MaskKind,
    fraction: f64,
    seeds: &[u64],
) -> Result<Vec<(u64, EvalReport)>, TaskError> {
    let (n, t) = x_full.shape();
    seeds
        .par_iter()
        .map(|&seed| {
            let mask = make_mask(kind, n, t, fraction, seed)?;
            let signal = MaskedSignal::new(x_full.clone(), mask)?;
            let (_, report, _) = impute(
                &signal,
                psi.clone(),
                phi.clone(),
                config,
                Some(x_full),
            )?;
            Ok((seed, report))
        })
        .collect()
}

/// Node representation `Ψ · Y` (n×k) from the final coefficients.
pub fn node_embedding(model: &DecompositionModel) -> DMatrix<f64> {
    &model.psi.psi * &model.y
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
/// within-cluster sum of squares. Rows of `points` are the samples.
pub fn kmeans(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Vec<usize>, TaskError> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(TaskError::KTooLarge { k, n });
    }
    assert!(restarts >= 1);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart));
        let (labels, wcss) = kmeans_once(points, k, &mut rng);
        if best.as_ref().is_none_or(|(w, _)| wcss < *w) {
            best = Some((wcss, labels));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn kmeans_once(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.nrows();
    let dim = points.ncols();

    // k-means++ seeding.
    let mut centroids: Vec<usize> = vec![rng.random_range(0..n)];
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| row_dist2(points, i, points, centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total <= f64::EPSILON {
            // All remaining points coincide with a centroid; pick the first
            // index not already chosen.
            (0..n).find(|i| !centroids.contains(i)).unwrap_or(0)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(next);
        for i in 0..n {
            dist2[i] = dist2[i].min(row_dist2(points, i, points, next));
        }
    }
    let mut centers: DMatrix<f64> = DMatrix::zeros(k, dim);
    for (c, &idx) in centroids.iter().enumerate() {
        centers.set_row(c, &points.row(idx));
    }

    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = row_dist2(points, i, &centers, c);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if labels[i] != best_c {
                labels[i] = best_c;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums: DMatrix<f64> = DMatrix::zeros(k, dim);
        for i in 0..n {
            counts[labels[i]] += 1;
            for j in 0..dim {
                sums[(labels[i], j)] += points[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its
                // current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        row_dist2(points, a, &centers, labels[a])
                            .partial_cmp(&row_dist2(points, b, &centers, labels[b]))
                            .unwrap()
                    })
                    .unwrap();
                centers.set_row(c, &points.row(far));
                changed = true;
            } else {
                for j in 0..dim {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let wcss: f64 = (0..n).map(|i| row_dist2(points, i, &centers, labels[i])).sum();
    (labels, wcss)
}

fn row_dist2(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        let d = a[(i, c)] - b[(j, c)];
        s += d * d;
    }
    s
}

/// Best label agreement over all cluster-to-class matchings, found by
/// maximum-weight assignment on the confusion matrix.
pub fn clustering_accuracy(labels: &[usize], truth: &[usize]) -> Result<f64, TaskError> {
    if labels.len() != truth.len() {
        return Err(TaskError::LengthMismatch {
            a: labels.len(),
            b: truth.len(),
        });
    }
    if labels.is_empty() {
        return Err(TaskError::EmptyMask);
    }
    let side = labels
        .iter()
        .chain(truth.iter())
        .max()
        .map_or(1, |&m| m + 1);
    let mut confusion = vec![vec![0_i64; side]; side];
    for (&l, &t) in labels.iter().zip(truth.iter()) {
        confusion[l][t] += 1;
    }
    let weights = PfMatrix::from_rows(confusion).expect("square confusion matrix");
    let (agreement, _) = kuhn_munkres(&weights);
    Ok(agreement as f64 / labels.len() as f64)
}

/// Period scores from the periodic coefficient matrix `A = Ψ·Y·W`: each
/// period `g` accumulates the signal energy its block's atoms contribute,
/// divided by `g^exponent` to penalize long periods. Exponent 0 disables
/// the penalty.
///
/// The contribution of atom `c` is `‖A_col_c‖²·‖φ_c‖²`. The atom-norm
/// factor matters because Ramanujan atoms are raw integer circulants with
/// very different norms; comparing bare coefficient norms would let the
/// constant atom outrank long periods on any signal with a slight offset.
pub fn period_strengths_with_exponent(
    model: &DecompositionModel,
    exponent: f64,
) -> Result<PeriodReport, TaskError> {
    if model.phi.kind != TimeDictionaryKind::Ramanujan {
        return Err(TaskError::WrongDictionaryKind {
            expected: TimeDictionaryKind::Ramanujan,
            got: model.phi.kind,
        });
    }
    let a = &model.psi.psi * &model.y * &model.w; // n×s
    let mut strengths: BTreeMap<usize, f64> = BTreeMap::new();
    for col in 0..a.ncols() {
        let period = model
            .phi
            .atom_period(col)
            .expect("Ramanujan dictionary carries period metadata");
        let energy = a.column(col).norm_squared() * model.phi.phi.row(col).norm_squared()
            / (period as f64).powf(exponent);
        *strengths.entry(period).or_insert(0.0) += energy;
    }
    let mut top_periods: Vec<usize> = strengths.keys().copied().collect();
    top_periods.sort_by(|&a, &b| {
        strengths[&b]
            .partial_cmp(&strengths[&a])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(PeriodReport {
        strengths,
        top_periods,
    })
}

/// [`period_strengths_with_exponent`] with the default penalty `1/g²`.
pub fn period_strengths(model: &DecompositionModel) -> Result<PeriodReport, TaskError> {
    period_strengths_with_exponent(model, 2.0)
}

/// Element-wise k-fold cross-validation over a rank grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankEstimate {
    pub chosen_k: usize,
    /// `(k, mean SSE across folds)` in grid order.
    pub mean_sse: Vec<(usize, f64)>,
    /// `(k, per-fold SSE)` in grid order.
    pub sse_table: Vec<(usize, Vec<f64>)>,
}

/// Partition the observed entries into `folds` random groups; for each
/// candidate `k` and fold, hide the fold's entries, fit, and measure SSE on
/// them. The `k` with the lowest mean SSE wins; exact ties go to smaller
/// `k` (the grid is scanned ascending).
pub fn estimate_rank(
    signal: &MaskedSignal,
    psi: &Arc<GraphDictionary>,
    phi: &Arc<TimeDictionary>,
    base_config: &SolverConfig,
    k_grid: &[usize],
    folds: usize,
    seed: u64,
) -> Result<RankEstimate, TaskError> {
    if folds < 2 {
        return Err(TaskError::TooFewFolds(folds));
    }
    assert!(!k_grid.is_empty(), "rank grid must be nonempty");
    let observed = signal.observed_positions();
    if observed.len() < folds {
        return Err(TaskError::NotEnoughObserved {
            needed: folds,
            got: observed.len(),
        });
    }
    let fold_sets = partition_folds(&observed, folds, seed);

    let mut grid: Vec<usize> = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();

    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&k| (0..folds).map(move |f| (k, f)))
        .collect();
    let sse_results: Result<Vec<f64>, TaskError> = jobs
        .par_iter()
        .map(|&(k, fold)| {
            let mut mask = signal.omega().clone();
            for &(r, c) in &fold_sets[fold] {
                mask[(r, c)] = 0.0;
            }
            let train = MaskedSignal::new(signal.x().clone(), mask)?;
            let config = SolverConfig { k, ..base_config.clone() };
            let model = fit(&train, psi.clone(), phi.clone(), &config)?;
            let recon = model.reconstruct();
            Ok(fold_sets[fold]
                .iter()
                .map(|&(r, c)| (recon[(r, c)] - signal.x()[(r, c)]).powi(2))
                .sum())
        })
        .collect();
    let sse_results = sse_results?;

    let mut sse_table = Vec::with_capacity(grid.len());
    let mut mean_sse = Vec::with_capacity(grid.len());
    for (gi, &k) in grid.iter().enumerate() {
        let per_fold: Vec<f64> = sse_results[gi * folds..(gi + 1) * folds].to_vec();
        let mean = per_fold.iter().sum::<f64>() / folds as f64;
        sse_table.push((k, per_fold));
        mean_sse.push((k, mean));
    }
    let chosen_k = mean_sse
        .iter()
        .fold((usize::MAX, f64::INFINITY), |acc, &(k, sse)| {
            if sse < acc.1 {
                (k, sse)
            } else {
                acc
            }
        })
        .0;
    Ok(RankEstimate {
        chosen_k,
        mean_sse,
        sse_table,
    })
}

/// Split positions into `folds` disjoint groups covering all of them,
/// shuffled deterministically per seed. Earlier folds take the remainder.
pub fn partition_folds(
    positions: &[(usize, usize)],
    folds: usize,
    seed: u64,
) -> Vec<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = sample(&mut rng, positions.len(), positions.len());
    let base = positions.len() / folds;
    let rem = positions.len() % folds;
    let mut out = Vec::with_capacity(folds);
    let mut cursor = 0usize;
    let shuffled: Vec<(usize, usize)> = order.iter().map(|i| positions[i]).collect();
    for f in 0..folds {
        let size = base + usize::from(f < rem);
        out.push(shuffled[cursor..cursor + size].to_vec());
        cursor += size;
    }
    out
}
