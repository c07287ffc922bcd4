//! Model criteria: accuracy ratio (Gini), its train/validation drift, and
//! collinearity diagnostics of a design.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::coding::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, spd_inverse};

/// The seven statistics compared across models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCriteria {
    pub ar_train: f64,
    pub ar_valid: f64,
    /// Signed relative drop `(ar_train - ar_valid) / ar_train`.
    pub ar_diff: f64,
    pub max_vif: f64,
    pub max_pearson: f64,
    pub max_cond_index: f64,
    pub max_pvalue: f64,
}

/// Accuracy ratio `2·AUC − 1`, label 1 (bad) expected to score higher.
/// Ties earn half credit.
pub fn gini(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Metric("scores and labels differ in length".into()));
    }
    let bads: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
    let totals = vec![1.0; labels.len()];
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Metric("labels must be 0/1".into()));
    }
    gini_grouped(scores, &bads, &totals)
}

/// Gini over grouped observations: `bads[i]` of `totals[i]` rows share
/// `scores[i]`. O(n log n).
pub fn gini_grouped(scores: &[f64], bads: &[f64], totals: &[f64]) -> Result<f64> {
    let n = scores.len();
    if bads.len() != n || totals.len() != n {
        return Err(Error::Metric("grouped inputs differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut n_bad, mut n_good) = (0.0, 0.0);
    let mut concordant = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        let (mut block_bad, mut block_good) = (0.0, 0.0);
        while j < n && scores[order[j]] == scores[order[i]] {
            block_bad += bads[order[j]];
            block_good += totals[order[j]] - bads[order[j]];
            j += 1;
        }
        concordant += block_bad * n_good + 0.5 * block_bad * block_good;
        n_bad += block_bad;
        n_good += block_good;
        i = j;
    }
    if n_bad == 0.0 || n_good == 0.0 {
        return Err(Error::Metric("Gini needs both classes present".into()));
    }
    Ok(2.0 * concordant / (n_bad * n_good) - 1.0)
}

pub fn ar_diff(ar_train: f64, ar_valid: f64) -> Result<f64> {
    if ar_train == 0.0 {
        return Err(Error::Metric("ar_diff undefined for ar_train = 0".into()));
    }
    Ok((ar_train - ar_valid) / ar_train)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collinearity {
    /// One per non-intercept column; `f64::INFINITY` marks exact dependence.
    pub vifs: Vec<f64>,
    pub max_vif: f64,
    pub max_pearson: f64,
    pub cond_indices: Vec<f64>,
    pub max_cond_index: f64,
    pub exact_collinearity: bool,
}

pub fn collinearity(design: &DesignMatrix) -> Result<Collinearity> {
    collinearity_rows(design.values(), design.n_cols(), None)
}

/// Row-major `values` with `n_cols` columns, column 0 the intercept;
/// optional frequency weights per row.
pub fn collinearity_rows(values: &[f64], n_cols: usize, weights: Option<&[f64]>) -> Result<Collinearity> {
    if n_cols == 0 || values.len() % n_cols != 0 {
        return Err(Error::Metric("design shape mismatch".into()));
    }
    let n = values.len() / n_cols;
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..n).map(w).sum();
    if total <= 0.0 {
        return Err(Error::Metric("empty design".into()));
    }
    let p = n_cols - 1;

    // weighted centred cross-products of non-intercept columns
    let mut mean = vec![0.0; p];
    for i in 0..n {
        let row = &values[i * n_cols + 1..(i + 1) * n_cols];
        for j in 0..p {
            mean[j] += w(i) * row[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let row = &values[i * n_cols + 1..(i + 1) * n_cols];
        let wi = w(i);
        for a in 0..p {
            let da = row[a] - mean[a];
            if da == 0.0 {
                continue;
            }
            for b in a..p {
                cov[(a, b)] += wi * da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }

    let (vifs, max_pearson, exact) = if p == 0 {
        (Vec::new(), 0.0, false)
    } else {
        let sd: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
        let mut corr = DMatrix::<f64>::identity(p, p);
        let mut max_pearson: f64 = 0.0;
        for a in 0..p {
            for b in 0..p {
                if a != b && sd[a] > 0.0 && sd[b] > 0.0 {
                    corr[(a, b)] = cov[(a, b)] / (sd[a] * sd[b]);
                    if a < b {
                        max_pearson = max_pearson.max(corr[(a, b)].abs().min(1.0));
                    }
                }
            }
        }
        let constant = sd.iter().any(|&s| !(s > 0.0));
        let singular = constant || !dependent_columns(&corr, 1e-12).is_empty();
        let vifs = if p == 1 {
            vec![if constant { f64::INFINITY } else { 1.0 }]
        } else if !singular {
            match spd_inverse(&corr) {
                Some(inv) => (0..p).map(|j| inv[(j, j)].max(1.0)).collect(),
                None => exact_vifs(&corr, &sd),
            }
        } else {
            exact_vifs(&corr, &sd)
        };
        let exact = vifs.iter().any(|v| v.is_infinite());
        let max_pearson = if p >= 2 { max_pearson } else { 0.0 };
        (vifs, max_pearson, exact)
    };
    let max_vif = vifs.iter().copied().fold(1.0, f64::max);

    // condition indices of the unit-length-scaled cross-product, intercept included
    let mut xtx = DMatrix::<f64>::zeros(n_cols, n_cols);
    for i in 0..n {
        let row = &values[i * n_cols..(i + 1) * n_cols];
        let wi = w(i);
        for a in 0..n_cols {
            if row[a] == 0.0 {
                continue;
            }
            for b in a..n_cols {
                xtx[(a, b)] += wi * row[a] * row[b];
            }
        }
    }
    for a in 0..n_cols {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let norms: Vec<f64> = (0..n_cols).map(|j| xtx[(j, j)].sqrt()).collect();
    let mut scaled = xtx.clone();
    for a in 0..n_cols {
        for b in 0..n_cols {
            let d = norms[a] * norms[b];
            scaled[(a, b)] = if d > 0.0 { xtx[(a, b)] / d } else { 0.0 };
        }
    }
    let eig = SymmetricEigen::new(scaled);
    let lmax = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
    let mut cond_indices: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l <= lmax * 1e-15 {
                f64::INFINITY
            } else {
                (lmax / l).sqrt().max(1.0)
            }
        })
        .collect();
    cond_indices.sort_by(|a, b| a.total_cmp(b));
    let max_cond_index = cond_indices.last().copied().unwrap_or(1.0);
    Ok(Collinearity {
        vifs,
        max_vif,
        max_pearson,
        cond_indices,
        max_cond_index,
        exact_collinearity: exact,
    })
}

/// VIFs when the correlation matrix is singular: a column spanned by the
/// others gets `INFINITY`, the rest come from the regression on the others.
fn exact_vifs(corr: &DMatrix<f64>, sd: &[f64]) -> Vec<f64> {
    let p = corr.nrows();
    (0..p)
        .map(|j| {
            if !(sd[j] > 0.0) {
                return f64::INFINITY;
            }
            let others: Vec<usize> = (0..p).filter(|&k| k != j && sd[k] > 0.0).collect();
            let mut order = others.clone();
            order.push(j);
            let sub = corr.select_rows(&order).select_columns(&order);
            let dep = dependent_columns(&sub, 1e-12);
            if dep.contains(&(order.len() - 1)) {
                return f64::INFINITY;
            }
            // R² of j on the independent subset of the others
            let basis: Vec<usize> = (0..others.len()).filter(|k| !dep.contains(k)).map(|k| others[k]).collect();
            if basis.is_empty() {
                return 1.0;
            }
            let rxx = corr.select_rows(&basis).select_columns(&basis);
            let rxy = corr.select_rows(&basis).column(j).clone_owned();
            match rxx.cholesky() {
                Some(ch) => {
                    let b = ch.solve(&rxy);
                    let r2 = rxy.dot(&b);
                    if r2 >= 1.0 {
                        f64::INFINITY
                    } else {
                        (1.0 / (1.0 - r2)).max(1.0)
                    }
                }
                None => f64::INFINITY,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking_is_one() {
        assert_eq!(gini(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_zero() {
        assert_eq!(gini(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn four_point_example() {
        let g = gini(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert!((g - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_class_is_an_error() {
        assert!(gini(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn ar_diff_examples() {
        assert_eq!(ar_diff(0.4, 0.4).unwrap(), 0.0);
        assert!((ar_diff(0.6, 0.45).unwrap() - 0.25).abs() < 1e-12);
        assert!((ar_diff(0.5, 0.55).unwrap() + 0.1).abs() < 1e-12);
        assert!(ar_diff(0.0, 0.1).is_err());
    }

    fn design(rows: &[[f64; 2]]) -> Vec<f64> {
        rows.iter().flat_map(|r| [1.0, r[0], r[1]]).collect()
    }

    #[test]
    fn orthogonal_columns() {
        let v = design(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]);
        let c = collinearity_rows(&v, 3, None).unwrap();
        assert!(c.vifs.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(c.max_pearson.abs() < 1e-12);
        assert!((c.max_cond_index - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_flagged() {
        let v = design(&[[1.0, 1.0], [2.0, 2.0], [0.5, 0.5], [3.0, 3.0]]);
        let c = collinearity_rows(&v, 3, None).unwrap();
        assert!(c.exact_collinearity);
        assert!(c.max_vif.is_infinite());
        assert!((c.max_pearson - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_column_reports_defaults() {
        let v: Vec<f64> = [1.0, 2.0, 3.0].iter().flat_map(|&x| [1.0, x]).collect();
        let c = collinearity_rows(&v, 2, None).unwrap();
        assert_eq!(c.vifs, vec![1.0]);
        assert_eq!(c.max_pearson, 0.0);
        assert!(c.max_cond_index >= 1.0);
    }

    #[test]
    fn weights_equal_replication() {
        let rows = [[1.0, 2.0], [2.0, 1.0], [3.0, 5.0], [0.0, 1.0]];
        let w = [1.0, 3.0, 2.0, 1.0];
        let mut expanded = Vec::new();
        for (r, &k) in rows.iter().zip(&w) {
            for _ in 0..k as usize {
                expanded.push(*r);
            }
        }
        let a = collinearity_rows(&design(&rows), 3, Some(&w)).unwrap();
        let b = collinearity_rows(&design(&expanded), 3, None).unwrap();
        assert!((a.max_vif - b.max_vif).abs() < 1e-12);
        assert!((a.max_cond_index - b.max_cond_index).abs() < 1e-9);
    }
}
