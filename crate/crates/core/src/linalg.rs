//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// ascending and a deterministic sign convention on the eigenvectors:
/// the first entry whose magnitude exceeds `SIGN_EPS` is made nonnegative.
///
/// The input is symmetrized as `(A + Aᵀ)/2` before factoring so that
/// numerically asymmetric inputs do not leak into the result.
pub fn sym_eigen_ascending(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("eigenvalue comparison")
            .then(i.cmp(&j))
    });

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).clone_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

const SIGN_EPS: f64 = 1e-9;

/// Flip `v` so its first entry with magnitude above `SIGN_EPS` is nonnegative.
pub fn fix_sign(v: &mut DVector<f64>) {
    for &x in v.iter() {
        if x.abs() > SIGN_EPS {
            if x < 0.0 {
                *v = -&*v;
            }
            return;
        }
    }
}

/// Largest absolute entry; 0 for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

/// True when every entry is finite.
pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Max-norm departure of `MᵀM` from the identity.
pub fn gram_identity_residual(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let k = gram.nrows();
    max_abs(&(gram - DMatrix::identity(k, k)))
}
