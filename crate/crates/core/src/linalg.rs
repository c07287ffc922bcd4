//! Small dense helpers shared by the estimation and diagnostics code.

use nalgebra::DMatrix;

/// Inverse of a symmetric positive definite matrix, `None` if the Cholesky
/// factorization fails.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = m.clone().cholesky()?;
    let inv = chol.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

/// Indices of columns of a symmetric PSD matrix that are (numerically) linear
/// combinations of earlier columns, found by an in-order Cholesky sweep that
/// skips pivots below `rel_tol` times the column's own diagonal.
pub(crate) fn dependent_columns(m: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let p = m.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut kept: Vec<usize> = Vec::with_capacity(p);
    let mut dependent = Vec::new();
    for j in 0..p {
        let diag = m[(j, j)];
        let mut d = diag;
        for &k in &kept {
            d -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || d <= rel_tol * diag.abs() {
            dependent.push(j);
            continue;
        }
        let piv = d.sqrt();
        l[(j, j)] = piv;
        for i in (j + 1)..p {
            let mut s = m[(i, j)];
            for &k in &kept {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / piv;
        }
        kept.push(j);
    }
    dependent
}
