//! Time dictionaries: real trigonometric (DFT-equivalent), Ramanujan
//! periodic, and B-spline bases.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{DictError, FourierPhase, TimeAtomMeta, TimeDictionary, TimeDictionaryKind};

/// Real orthonormal trigonometric basis spanning the same space as the
/// complex DFT of length `t`.
///
/// Rows: the constant `1/√t`, then paired `cos(2πkj/t)·√(2/t)` and
/// `sin(2πkj/t)·√(2/t)` for `k = 1..⌊(t−1)/2⌋`, plus the alternating row
/// `(−1)^j/√t` when `t` is even. Keeping the basis real keeps the solver in
/// real arithmetic while remaining orthonormal.
pub fn build_fourier(t: usize) -> TimeDictionary {
    assert!(t >= 1, "signal length must be positive");
    let mut phi = DMatrix::zeros(t, t);
    let mut atom_meta = Vec::with_capacity(t);

    let mut row = 0;
    let c0 = 1.0 / (t as f64).sqrt();
    for j in 0..t {
        phi[(row, j)] = c0;
    }
    atom_meta.push(TimeAtomMeta::Fourier {
        frequency: 0,
        phase: FourierPhase::Cos,
    });
    row += 1;

    let scale = (2.0 / t as f64).sqrt();
    for k in 1..=((t - 1) / 2) {
        for j in 0..t {
            let angle = 2.0 * PI * (k * j) as f64 / t as f64;
            phi[(row, j)] = scale * angle.cos();
            phi[(row + 1, j)] = scale * angle.sin();
        }
        atom_meta.push(TimeAtomMeta::Fourier {
            frequency: k,
            phase: FourierPhase::Cos,
        });
        atom_meta.push(TimeAtomMeta::Fourier {
            frequency: k,
            phase: FourierPhase::Sin,
        });
        row += 2;
    }

    if t.is_multiple_of(2) && t > 1 {
        for j in 0..t {
            phi[(row, j)] = if j % 2 == 0 { c0 } else { -c0 };
        }
        atom_meta.push(TimeAtomMeta::Fourier {
            frequency: t / 2,
            phase: FourierPhase::Cos,
        });
        row += 1;
    }
    assert_eq!(row, t);

    let dict = TimeDictionary {
        phi,
        kind: TimeDictionaryKind::Fourier,
        orthonormal_rows: true,
        atom_meta,
    };
    dict.assert_valid();
    dict
}

/// Count of `k ∈ [1, d]` with `gcd(k, d) = 1`.
pub fn euler_totient(d: usize) -> usize {
    assert!(d >= 1);
    let mut result = d;
    let mut m = d;
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            while m.is_multiple_of(p) {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Ramanujan sum `C_d(g) = Σ_{k coprime to d} e^{i·2πkg/d}`, evaluated by
/// direct complex summation. The result is an integer; the leftover
/// imaginary part must stay below 1e-9.
pub fn ramanujan_sum(d: usize, g: usize) -> i64 {
    assert!(d >= 1);
    let mut re = 0.0_f64;
    let mut im = 0.0_f64;
    for k in 1..=d {
        if gcd(k, d) == 1 {
            let angle = 2.0 * PI * ((k as u64 * g as u64) % d as u64) as f64 / d as f64;
            re += angle.cos();
            im += angle.sin();
        }
    }
    assert!(
        im.abs() <= 1e-9,
        "Ramanujan sum imaginary part {im:e} for d={d}, g={g}"
    );
    re.round() as i64
}

/// Ramanujan periodic dictionary for signals of length `t` with periods up
/// to `g_max`.
///
/// For each period `g` and divisor `d | g`, the block `D_d` takes the first
/// `φ(d)` columns of the `d×d` circulant with entries `C_d((r−c) mod d)`,
/// tiled periodically to length `t`. Atoms are those columns transposed to
/// rows, so `s = Σ_{g≤g_max} Σ_{d|g} φ(d) = g_max(g_max+1)/2`. Not
/// orthogonal.
pub fn build_ramanujan(t: usize, g_max: usize) -> Result<TimeDictionary, DictError> {
    assert!(g_max >= 1, "g_max must be positive");
    if g_max > t {
        return Err(DictError::GMaxTooLarge { g_max, t });
    }

    let s = g_max * (g_max + 1) / 2;
    let mut phi = DMatrix::zeros(s, t);
    let mut atom_meta = Vec::with_capacity(s);

    let mut row = 0;
    for g in 1..=g_max {
        for d in 1..=g {
            if g % d != 0 {
                continue;
            }
            let c: Vec<f64> = (0..d).map(|r| ramanujan_sum(d, r) as f64).collect();
            for col in 0..euler_totient(d) {
                for j in 0..t {
                    let idx = (j as i64 - col as i64).rem_euclid(d as i64) as usize;
                    phi[(row, j)] = c[idx];
                }
                atom_meta.push(TimeAtomMeta::Ramanujan {
                    period: g,
                    divisor: d,
                    column: col,
                });
                row += 1;
            }
        }
    }
    assert_eq!(row, s);

    let dict = TimeDictionary {
        phi,
        kind: TimeDictionaryKind::Ramanujan,
        orthonormal_rows: false,
        atom_meta,
    };
    dict.assert_valid();
    Ok(dict)
}

/// [`build_ramanujan`] with exact-duplicate atom rows removed (first
/// occurrence kept). Divisor blocks repeat across periods — the `d = 1`
/// block shows up for every `g` — so the full stacking contains identical
/// rows that add nothing to the span.
pub fn build_ramanujan_dedup(t: usize, g_max: usize) -> Result<TimeDictionary, DictError> {
    let full = build_ramanujan(t, g_max)?;
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..full.atom_count() {
        let row_i = full.phi.row(i);
        let duplicate = keep.iter().any(|&j| full.phi.row(j) == row_i);
        if !duplicate {
            keep.push(i);
        }
    }
    let mut phi = DMatrix::zeros(keep.len(), t);
    let mut atom_meta = Vec::with_capacity(keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        phi.set_row(dst, &full.phi.row(src));
        atom_meta.push(full.atom_meta[src]);
    }
    let dict = TimeDictionary {
        phi,
        kind: TimeDictionaryKind::Ramanujan,
        orthonormal_rows: false,
        atom_meta,
    };
    dict.assert_valid();
    Ok(dict)
}

/// Cox-de-Boor B-spline basis value `B_{i,p}(u)` on half-open knot spans,
/// with 0/0 terms defined as 0.
pub fn bspline_value(i: usize, p: usize, u: f64, knots: &[f64]) -> f64 {
    assert!(knots.len() >= i + p + 2, "knot vector too short");
    cox_de_boor(i, p, u, knots, f64::NAN)
}

/// Same recursion, but the base case also accepts `u == closed_end` inside
/// the final nonempty span, extending the half-open convention to include
/// the right end of the sampling domain.
fn cox_de_boor(i: usize, p: usize, u: f64, knots: &[f64], closed_end: f64) -> f64 {
    if p == 0 {
        if knots[i] <= u && u < knots[i + 1] {
            return 1.0;
        }
        if u == closed_end && knots[i] < knots[i + 1] && knots[i + 1] == closed_end {
            return 1.0;
        }
        return 0.0;
    }
    let mut value = 0.0;
    let left_den = knots[i + p] - knots[i];
    if left_den > 0.0 {
        value += (u - knots[i]) / left_den * cox_de_boor(i, p - 1, u, knots, closed_end);
    }
    let right_den = knots[i + p + 1] - knots[i + 1];
    if right_den > 0.0 {
        value +=
            (knots[i + p + 1] - u) / right_den * cox_de_boor(i + 1, p - 1, u, knots, closed_end);
    }
    value
}

/// Clamped uniform knot vector over `[0, t−1]`: `degree+1` repeated knots at
/// each boundary and `n_basis − degree − 1` equally spaced interior knots.
pub(crate) fn clamped_uniform_knots(t: usize, n_basis: usize, degree: usize) -> Vec<f64> {
    let end = (t - 1) as f64;
    let interior = n_basis - degree - 1;
    let mut knots = Vec::with_capacity(n_basis + degree + 1);
    knots.extend(std::iter::repeat_n(0.0, degree + 1));
    for j in 1..=interior {
        knots.push(j as f64 * end / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(end, degree + 1));
    knots
}

/// B-spline dictionary: `n_basis` atoms of the given degree on a clamped
/// uniform knot vector over `[0, t−1]`, sampled at integer times. Rows are
/// rescaled to unit ℓ2 norm so sparsity weights transfer across dictionary
/// kinds. Not orthogonal.
pub fn build_spline(t: usize, n_basis: usize, degree: usize) -> Result<TimeDictionary, DictError> {
    assert!(t >= 1, "signal length must be positive");
    if n_basis < degree + 1 || n_basis > t {
        return Err(DictError::InsufficientBasis { n_basis, degree, t });
    }
    let knots = clamped_uniform_knots(t, n_basis, degree);
    let end = (t - 1) as f64;

    let mut phi = DMatrix::zeros(n_basis, t);
    let mut atom_meta = Vec::with_capacity(n_basis);
    for i in 0..n_basis {
        for j in 0..t {
            phi[(i, j)] = cox_de_boor(i, degree, j as f64, &knots, end);
        }
        let norm = phi.row(i).norm();
        assert!(norm > 0.0, "spline atom {i} vanished on the sample grid");
        for j in 0..t {
            phi[(i, j)] /= norm;
        }
        atom_meta.push(TimeAtomMeta::Spline {
            support: (knots[i], knots[i + degree + 1]),
        });
    }

    let dict = TimeDictionary {
        phi,
        kind: TimeDictionaryKind::Spline,
        orthonormal_rows: false,
        atom_meta,
    };
    dict.assert_valid();
    Ok(dict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fourier_of_length_one_is_identity() {
        let dict = build_fourier(1);
        assert_eq!(dict.atom_count(), 1);
        assert_eq!(dict.phi[(0, 0)], 1.0);
    }

    #[test]
    fn fourier_rows_are_orthonormal() {
        for t in [2, 3, 4, 5, 8, 16, 31] {
            let dict = build_fourier(t);
            assert_eq!(dict.atom_count(), t);
            assert!(
                dict.orthonormality_residual() <= 1e-10,
                "t={t}: residual {}",
                dict.orthonormality_residual()
            );
        }
    }

    #[test]
    fn fourier_projection_concentrates_on_matching_atom() {
        let t = 8;
        let dict = build_fourier(t);
        let signal: Vec<f64> = (0..t)
            .map(|j| (2.0 * PI * 2.0 * j as f64 / t as f64).cos())
            .collect();
        // Projection energy onto each atom; only the k=2 cosine row should
        // be nonzero for an in-basis cosine.
        let mut best = (0, 0.0);
        let mut total = 0.0;
        for r in 0..t {
            let coef: f64 = (0..t).map(|j| dict.phi[(r, j)] * signal[j]).sum();
            total += coef * coef;
            if coef * coef > best.1 {
                best = (r, coef * coef);
            }
        }
        assert!(best.1 / total > 1.0 - 1e-12);
        assert_eq!(
            dict.atom_meta[best.0],
            TimeAtomMeta::Fourier {
                frequency: 2,
                phase: FourierPhase::Cos
            }
        );
    }

    #[test]
    fn totient_small_values() {
        assert_eq!(euler_totient(1), 1);
        assert_eq!(euler_totient(6), 2);
        assert_eq!(euler_totient(10), 4);
    }

    #[test]
    fn totient_matches_gcd_enumeration() {
        for d in 1..=200 {
            let brute = (1..=d).filter(|&k| gcd(k, d) == 1).count();
            assert_eq!(euler_totient(d), brute, "d={d}");
        }
    }

    #[test]
    fn ramanujan_sum_base_cases() {
        for g in 0..10 {
            assert_eq!(ramanujan_sum(1, g), 1);
            assert_eq!(ramanujan_sum(2, g), if g % 2 == 0 { 1 } else { -1 });
        }
        assert_eq!(ramanujan_sum(3, 0), 2);
        assert_eq!(ramanujan_sum(3, 1), -1);
        assert_eq!(ramanujan_sum(3, 2), -1);
    }

    #[test]
    fn ramanujan_sum_is_periodic_in_g() {
        for d in 1..=50 {
            for g in 0..=200 {
                assert_eq!(ramanujan_sum(d, g), ramanujan_sum(d, g % d), "d={d} g={g}");
            }
        }
    }

    #[test]
    fn ramanujan_dictionary_trivial_case() {
        let dict = build_ramanujan(4, 1).unwrap();
        assert_eq!(dict.atom_count(), 1);
        for j in 0..4 {
            assert_eq!(dict.phi[(0, j)], 1.0);
        }
    }

    #[test]
    fn ramanujan_dictionary_atom_counts() {
        assert_eq!(build_ramanujan(10, 3).unwrap().atom_count(), 6);
        assert_eq!(build_ramanujan(64, 10).unwrap().atom_count(), 55);
    }

    #[test]
    fn ramanujan_atoms_are_divisor_periodic() {
        let dict = build_ramanujan(30, 6).unwrap();
        for (i, meta) in dict.atom_meta.iter().enumerate() {
            let TimeAtomMeta::Ramanujan { divisor, .. } = meta else {
                panic!("expected Ramanujan metadata");
            };
            for j in 0..(30 - divisor) {
                assert_eq!(dict.phi[(i, j)], dict.phi[(i, j + divisor)]);
            }
        }
    }

    #[test]
    fn ramanujan_rejects_excessive_period() {
        assert!(matches!(
            build_ramanujan(4, 5),
            Err(DictError::GMaxTooLarge { g_max: 5, t: 4 })
        ));
    }

    #[test]
    fn ramanujan_dedup_removes_repeated_constant_rows() {
        let full = build_ramanujan(12, 4).unwrap();
        let dedup = build_ramanujan_dedup(12, 4).unwrap();
        // d=1 repeats for every period, d=2 for periods 2 and 4.
        assert_eq!(full.atom_count(), 10);
        assert_eq!(dedup.atom_count(), 6);
        for i in 0..dedup.atom_count() {
            for j in (i + 1)..dedup.atom_count() {
                assert_ne!(dedup.phi.row(i), dedup.phi.row(j));
            }
        }
    }

    #[test]
    fn ramanujan_dictionary_is_not_orthonormal() {
        let dict = build_ramanujan(16, 3).unwrap();
        assert!(!dict.orthonormal_rows);
        assert!(dict.orthonormality_residual() > 1e-3);
    }

    #[test]
    fn bspline_degree_zero_is_an_indicator() {
        let knots = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(bspline_value(0, 0, 0.5, &knots), 1.0);
        assert_eq!(bspline_value(0, 0, 1.5, &knots), 0.0);
        assert_eq!(bspline_value(1, 0, 1.5, &knots), 1.0);
        // Half-open span: the right endpoint belongs to the next basis.
        assert_eq!(bspline_value(0, 0, 1.0, &knots), 0.0);
    }

    #[test]
    fn bspline_degree_one_is_the_hat_function() {
        let knots = [0.0, 1.0, 2.0];
        assert_abs_diff_eq!(bspline_value(0, 1, 0.5, &knots), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(bspline_value(0, 1, 1.0, &knots), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bspline_value(0, 1, 1.5, &knots), 0.5, epsilon = 1e-15);
        assert_eq!(bspline_value(0, 1, 2.5, &knots), 0.0);
    }

    #[test]
    fn bspline_handles_repeated_knots_as_zero_over_zero() {
        let knots = [0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0];
        let v: f64 = (0..4).map(|i| bspline_value(i, 2, 0.7, &knots)).sum();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spline_degree_zero_full_basis_is_identity() {
        let dict = build_spline(6, 6, 0).unwrap();
        assert_eq!(dict.phi, DMatrix::identity(6, 6));
    }

    #[test]
    fn spline_atoms_partition_unity_before_normalization() {
        let (t, n_basis, degree) = (20, 6, 3);
        let knots = clamped_uniform_knots(t, n_basis, degree);
        let end = (t - 1) as f64;
        for step in 0..=200 {
            let u = end * step as f64 / 200.0;
            let total: f64 = (0..n_basis)
                .map(|i| cox_de_boor(i, degree, u, &knots, end))
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn spline_supports_are_contiguous_and_cover_the_domain() {
        let dict = build_spline(20, 6, 3).unwrap();
        let mut covered = [false; 20];
        for i in 0..dict.atom_count() {
            let nonzero: Vec<usize> = (0..20).filter(|&j| dict.phi[(i, j)] != 0.0).collect();
            assert!(!nonzero.is_empty());
            let (first, last) = (nonzero[0], *nonzero.last().unwrap());
            assert_eq!(nonzero.len(), last - first + 1, "atom {i} support has gaps");
            for j in nonzero {
                covered[j] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn spline_rows_have_unit_norm() {
        let dict = build_spline(50, 12, 3).unwrap();
        for i in 0..dict.atom_count() {
            assert_abs_diff_eq!(dict.phi.row(i).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spline_dictionary_is_not_orthonormal() {
        let dict = build_spline(40, 10, 3).unwrap();
        assert!(!dict.orthonormal_rows);
        assert!(dict.orthonormality_residual() > 1e-3);
    }

    #[test]
    fn spline_rejects_bad_configs() {
        assert!(matches!(
            build_spline(10, 3, 3),
            Err(DictError::InsufficientBasis { .. })
        ));
        assert!(matches!(
            build_spline(4, 5, 1),
            Err(DictError::InsufficientBasis { .. })
        ));
    }
}
