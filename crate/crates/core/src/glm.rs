//! Binomial-logit estimation by iteratively reweighted least squares, Wald,
//! score and likelihood-ratio tests, and the backward / stepwise attribute
//! adjustment of indicator-coded models.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::coding::{encode_view, AttributeView, CodingKind, ColumnLabel, DesignMatrix, Grouping, VariableCoding};
use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, spd_inverse};

/// Binary outcomes, possibly aggregated: row `i` stands for `totals[i]`
/// observations of which `bads[i]` have target 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    bads: Vec<f64>,
    totals: Vec<f64>,
}

impl Response {
    pub fn binary(targets: &[u8]) -> Response {
        Response {
            bads: targets.iter().map(|&y| f64::from(y.min(1))).collect(),
            totals: vec![1.0; targets.len()],
        }
    }

    pub fn grouped(bads: Vec<f64>, totals: Vec<f64>) -> Result<Response> {
        if bads.len() != totals.len() {
            return Err(Error::Fit("bads and totals differ in length".into()));
        }
        if bads.iter().zip(&totals).any(|(&b, &n)| !(b >= 0.0 && b <= n && n.is_finite())) {
            return Err(Error::Fit("grouped counts need 0 <= bads <= totals".into()));
        }
        Ok(Response { bads, totals })
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn bads(&self) -> &[f64] {
        &self.bads
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    pub fn n_bad(&self) -> f64 {
        self.bads.iter().sum()
    }

    pub fn n_total(&self) -> f64 {
        self.totals.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence when the largest coefficient change falls below this.
    pub tol: f64,
    /// `|beta_j| · sd(x_j)` above this flags separation.
    pub separation_limit: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 50,
            tol: 1e-8,
            separation_limit: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub labels: Vec<ColumnLabel>,
    pub beta: Vec<f64>,
    /// Row-major inverse observed information.
    pub covariance: Vec<f64>,
    pub loglik: f64,
    /// Log-likelihood after each accepted iteration, starting value first.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub separation: bool,
    pub wald_chi2: Vec<f64>,
    pub p_values: Vec<f64>,
}

impl ModelFit {
    pub fn n_params(&self) -> usize {
        self.beta.len()
    }

    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[j * self.beta.len() + j].sqrt()
    }

    /// Largest Wald p-value over non-intercept terms; 0 for an
    /// intercept-only model.
    pub fn max_pvalue(&self) -> f64 {
        self.p_values.iter().skip(1).copied().fold(0.0, f64::max)
    }

    pub fn linear_predictor(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        if design.n_cols() != self.beta.len() {
            return Err(Error::Fit(format!(
                "design has {} columns, model {}",
                design.n_cols(),
                self.beta.len()
            )));
        }
        Ok((0..design.n_rows())
            .map(|i| dot(design.row(i), &self.beta))
            .collect())
    }

    pub fn predict(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        Ok(self.linear_predictor(design)?.into_iter().map(sigmoid).collect())
    }

    /// Labels, coefficients, standard errors, Wald statistics.
    pub fn to_text(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model {name}");
        let _ = writeln!(
            s,
            "loglik {} iterations {} converged {} separation {}",
            self.loglik, self.iterations, self.converged, self.separation
        );
        for (j, l) in self.labels.iter().enumerate() {
            let _ = writeln!(
                s,
                "term {}\tbeta {}\tse {}\twald {}\tp {}",
                l,
                self.beta[j],
                self.std_error(j),
                self.wald_chi2[j],
                self.p_values[j]
            );
        }
        s.push_str("end\n");
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Upper tail of chi-square with one degree of freedom.
pub fn chi2_sf1(x: f64) -> f64 {
    if x.is_nan() {
        return 1.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    erfc((x / 2.0).sqrt()).clamp(0.0, 1.0)
}

pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if df == 1 {
        return chi2_sf1(x);
    }
    if df == 0 || !(x > 0.0) {
        return 1.0;
    }
    ChiSquared::new(df as f64).map_or(1.0, |d| d.sf(x).clamp(0.0, 1.0))
}

fn loglik(design: &DesignMatrix, r: &Response, beta: &[f64]) -> f64 {
    (0..design.n_rows())
        .map(|i| {
            let eta = dot(design.row(i), beta);
            r.bads[i] * eta - r.totals[i] * log1pexp(eta)
        })
        .sum()
}

/// Gradient and information at `beta`.
fn score_and_information(design: &DesignMatrix, r: &Response, beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let p = design.n_cols();
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for i in 0..design.n_rows() {
        let row = design.row(i);
        let mu = sigmoid(dot(row, beta));
        let resid = r.bads[i] - r.totals[i] * mu;
        let w = r.totals[i] * mu * (1.0 - mu);
        for a in 0..p {
            let xa = row[a];
            if xa == 0.0 {
                continue;
            }
            grad[a] += xa * resid;
            let wx = w * xa;
            for b in a..p {
                info[(a, b)] += wx * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(a, b)] = info[(b, a)];
        }
    }
    (grad, info)
}

/// Weighted cross-product scaled to unit diagonal.
fn scaled_cross_product(design: &DesignMatrix, weights: &[f64]) -> DMatrix<f64> {
    let p = design.n_cols();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for i in 0..design.n_rows() {
        let row = design.row(i);
        for a in 0..p {
            if row[a] == 0.0 {
                continue;
            }
            for b in a..p {
                m[(a, b)] += weights[i] * row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    let d: Vec<f64> = (0..p).map(|j| m[(j, j)].sqrt()).collect();
    for a in 0..p {
        for b in 0..p {
            let s = d[a] * d[b];
            m[(a, b)] = if s > 0.0 { m[(a, b)] / s } else { 0.0 };
        }
    }
    m
}

/// Columns that are linear combinations of earlier ones (including the
/// intercept) on the rows carrying weight.
pub fn aliased_columns(design: &DesignMatrix, response: &Response) -> Vec<usize> {
    let m = scaled_cross_product(design, &response.totals);
    let mut dep = dependent_columns(&m, 1e-10);
    // a column that is zero on every weighted row is aliased too
    for j in 0..design.n_cols() {
        if m[(j, j)] == 0.0 && !dep.contains(&j) {
            dep.push(j);
        }
    }
    dep.sort_unstable();
    dep
}

pub fn fit(design: &DesignMatrix, response: &Response) -> Result<ModelFit> {
    fit_with(design, response, &FitOptions::default(), None)
}

/// IRLS with step-halving; `start` warm-starts the coefficients.
pub fn fit_with(
    design: &DesignMatrix,
    response: &Response,
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<ModelFit> {
    let p = design.n_cols();
    if response.len() != design.n_rows() {
        return Err(Error::Fit("response and design row counts differ".into()));
    }
    let n_obs = response.n_total();
    if n_obs <= p as f64 {
        return Err(Error::Fit(format!("{n_obs} observations for {p} parameters")));
    }
    let n_bad = response.n_bad();
    if n_bad <= 0.0 || n_bad >= n_obs {
        return Err(Error::Fit("response has a single class".into()));
    }
    let aliased = aliased_columns(design, response);
    if !aliased.is_empty() {
        return Err(Error::Singular {
            columns: aliased.iter().map(|&j| design.labels()[j].to_string()).collect(),
        });
    }

    let mut beta = match start {
        Some(s) if s.len() == p && s.iter().all(|v| v.is_finite()) => s.to_vec(),
        _ => {
            let mut b = vec![0.0; p];
            b[0] = (n_bad / (n_obs - n_bad)).ln();
            b
        }
    };
    let mut ll = loglik(design, response, &beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let (grad, info) = score_and_information(design, response, &beta);
        let Some(chol) = info.cholesky() else { break };
        let delta = chol.solve(&grad);
        if delta.iter().any(|d| !d.is_finite()) {
            break;
        }
        let slack = 1e-12 * (1.0 + ll.abs());
        let mut step = 1.0;
        let mut cand: Vec<f64>;
        let mut ll_cand;
        loop {
            cand = beta.iter().zip(delta.iter()).map(|(b, d)| b + step * d).collect();
            ll_cand = loglik(design, response, &cand);
            if ll_cand >= ll - slack || step < 1e-8 {
                break;
            }
            step *= 0.5;
        }
        if ll_cand < ll - slack {
            // no ascent possible at machine precision
            converged = delta.amax() * step < opts.tol.sqrt();
            break;
        }
        let change = delta.amax() * step;
        beta = cand;
        ll = ll_cand;
        trace.push(ll);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let (_, info) = score_and_information(design, response, &beta);
    let covariance = spd_inverse(&info);
    let mut separation = false;
    let total = response.n_total();
    for j in 1..p {
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..design.n_rows() {
            let x = design.get(i, j);
            m1 += response.totals[i] * x;
            m2 += response.totals[i] * x * x;
        }
        let sd = (m2 / total - (m1 / total).powi(2)).max(0.0).sqrt();
        if beta[j].abs() * sd > opts.separation_limit {
            separation = true;
        }
    }
    let cov: Vec<f64> = match &covariance {
        Some(c) => (0..p).flat_map(|a| (0..p).map(move |b| (a, b))).map(|(a, b)| c[(a, b)]).collect(),
        None => vec![f64::INFINITY; p * p],
    };
    let (wald_chi2, p_values): (Vec<f64>, Vec<f64>) = (0..p)
        .map(|j| {
            let var = cov[j * p + j];
            let chi2 = if var.is_finite() && var > 0.0 { beta[j] * beta[j] / var } else { 0.0 };
            (chi2, chi2_sf1(chi2))
        })
        .unzip();
    Ok(ModelFit {
        labels: design.labels().to_vec(),
        beta,
        covariance: cov,
        loglik: ll,
        loglik_trace: trace,
        iterations,
        converged: converged && !separation && covariance.is_some(),
        separation,
        wald_chi2,
        p_values,
    })
}

/// Score chi-square for adding each candidate column to the model made of
/// the `in_model` columns (intercept included) fitted as `fit`. `None` when
/// the candidate is a linear combination of the model columns.
pub fn score_tests(
    design: &DesignMatrix,
    response: &Response,
    in_model: &[usize],
    fit: &ModelFit,
    candidates: &[usize],
) -> Vec<Option<f64>> {
    let m = in_model.len();
    let cov = DMatrix::from_row_slice(m, m, &fit.covariance);
    let mut u = vec![0.0; candidates.len()];
    let mut icc = vec![0.0; candidates.len()];
    let mut imc = DMatrix::<f64>::zeros(m, candidates.len());
    for i in 0..design.n_rows() {
        let row = design.row(i);
        let eta: f64 = in_model.iter().zip(&fit.beta).map(|(&j, b)| row[j] * b).sum();
        let mu = sigmoid(eta);
        let resid = response.bads[i] - response.totals[i] * mu;
        let w = response.totals[i] * mu * (1.0 - mu);
        for (c, &j) in candidates.iter().enumerate() {
            let x = row[j];
            if x == 0.0 {
                continue;
            }
            u[c] += x * resid;
            icc[c] += w * x * x;
            for (a, &k) in in_model.iter().enumerate() {
                imc[(a, c)] += w * row[k] * x;
            }
        }
    }
    (0..candidates.len())
        .map(|c| {
            let v = imc.column(c);
            let var = icc[c] - (v.transpose() * &cov * v)[(0, 0)];
            if var > 1e-10 * icc[c].max(f64::MIN_POSITIVE) && cov.iter().all(|x| x.is_finite()) {
                Some(u[c] * u[c] / var)
            } else {
                None
            }
        })
        .collect()
}

/// Per-variable likelihood-ratio tests: the model against the model without
/// all of that variable's columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Type3Test {
    pub variable: String,
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
}

pub fn type3_tests(design: &DesignMatrix, response: &Response, fit: &ModelFit) -> Result<Vec<Type3Test>> {
    let mut vars: Vec<&str> = Vec::new();
    for l in design.labels().iter().filter(|l| !l.is_intercept()) {
        if !vars.contains(&l.variable.as_str()) {
            vars.push(&l.variable);
        }
    }
    let mut out = Vec::new();
    for v in vars {
        let keep: Vec<usize> = (1..design.n_cols()).filter(|&j| design.labels()[j].variable != v).collect();
        let df = design.n_cols() - 1 - keep.len();
        let reduced = fit_with(&design.select_columns(&keep), response, &FitOptions::default(), None)?;
        let chi2 = (2.0 * (fit.loglik - reduced.loglik)).max(0.0);
        out.push(Type3Test {
            variable: v.to_string(),
            chi2,
            df,
            p_value: chi2_sf(chi2, df),
        });
    }
    Ok(out)
}

/// Result of an attribute selection run on an indicator design.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub fit: ModelFit,
    /// Remaining design column indices, intercept first.
    pub kept: Vec<usize>,
    /// Eliminated (or never entered) columns in the order decided.
    pub removed: Vec<usize>,
    /// Variables that lost every column.
    pub dropped_variables: Vec<String>,
}

fn dropped(design: &DesignMatrix, kept: &[usize]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (j, l) in design.labels().iter().enumerate().skip(1) {
        let has_any = kept.iter().any(|&k| design.labels()[k].variable == l.variable);
        if !has_any && !out.contains(&l.variable) {
            let _ = j;
            out.push(l.variable.clone());
        }
    }
    out
}

fn warm_start(prev: &ModelFit, prev_cols: &[usize], cols: &[usize]) -> Vec<f64> {
    cols.iter()
        .map(|c| prev_cols.iter().position(|p| p == c).map_or(0.0, |k| prev.beta[k]))
        .collect()
}

/// Removes, one at a time, the column with the largest Wald p-value above
/// `stay_p` (ties to the earliest column) until every remaining column is
/// significant.
pub fn backward_adjust(design: &DesignMatrix, response: &Response, stay_p: f64) -> Result<Selection> {
    let mut kept: Vec<usize> = (0..design.n_cols()).collect();
    let mut removed = Vec::new();
    let opts = FitOptions::default();
    let mut fit = fit_with(design, response, &opts, None)?;
    loop {
        let mut worst: Option<(f64, usize)> = None;
        for k in 1..kept.len() {
            let p = fit.p_values[k];
            if p > stay_p && worst.is_none_or(|(w, _)| p > w) {
                worst = Some((p, k));
            }
        }
        let Some((_, k)) = worst else { break };
        let prev_cols = kept.clone();
        removed.push(kept.remove(k));
        let start = warm_start(&fit, &prev_cols, &kept);
        fit = fit_with(&design.select_columns(&kept[1..]), response, &opts, Some(&start))?;
    }
    Ok(Selection {
        dropped_variables: dropped(design, &kept),
        fit,
        kept,
        removed,
    })
}

/// Forward entry by score test (`p < entry_p`), Wald removal (`p > stay_p`),
/// starting from the intercept. A move back to an already visited column set
/// ends the search.
pub fn stepwise_adjust(design: &DesignMatrix, response: &Response, entry_p: f64, stay_p: f64) -> Result<Selection> {
    let opts = FitOptions::default();
    let mut kept: Vec<usize> = vec![0];
    let mut fit = fit_with(&design.select_columns(&[]), response, &opts, None)?;
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(kept.clone());
    let mut order: Vec<usize> = Vec::new();
    let max_steps = 4 * design.n_cols() + 10;
    for _ in 0..max_steps {
        let candidates: Vec<usize> = (1..design.n_cols()).filter(|j| !kept.contains(j)).collect();
        let mut moved = false;
        if !candidates.is_empty() {
            let chi = score_tests(design, response, &kept, &fit, &candidates);
            let mut best: Option<(f64, usize)> = None;
            for (c, s) in chi.iter().enumerate() {
                if let Some(s) = s {
                    if best.is_none_or(|(b, _)| *s > b) {
                        best = Some((*s, candidates[c]));
                    }
                }
            }
            if let Some((s, j)) = best {
                if chi2_sf1(s) < entry_p {
                    let mut next = kept.clone();
                    next.push(j);
                    next[1..].sort_unstable();
                    if visited.insert(next.clone()) {
                        let start = warm_start(&fit, &kept, &next);
                        fit = fit_with(&design.select_columns(&next[1..]), response, &opts, Some(&start))?;
                        kept = next;
                        order.push(j);
                        moved = true;
                    }
                }
            }
        }
        // removal of the least significant column
        let mut worst: Option<(f64, usize)> = None;
        for k in 1..kept.len() {
            let p = fit.p_values[k];
            if p > stay_p && worst.is_none_or(|(w, _)| p > w) {
                worst = Some((p, k));
            }
        }
        if let Some((_, k)) = worst {
            let mut next = kept.clone();
            next.remove(k);
            if visited.insert(next.clone()) {
                let start = warm_start(&fit, &kept, &next);
                fit = fit_with(&design.select_columns(&next[1..]), response, &opts, Some(&start))?;
                kept = next;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let removed: Vec<usize> = (1..design.n_cols()).filter(|j| !kept.contains(j)).collect();
    let _ = order;
    Ok(Selection {
        dropped_variables: dropped(design, &kept),
        fit,
        kept,
        removed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimation {
    Nested,
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionRule {
    Backward,
    Stepwise,
}

/// One of the twelve attribute adjustment methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AdjustmentMethod {
    pub estimation: Estimation,
    pub selection: SelectionRule,
    pub coding: CodingKind,
}

impl AdjustmentMethod {
    pub const ALL: [AdjustmentMethod; 12] = {
        use CodingKind::{NestedAsc as A, NestedDesc as D, NestedMono as M};
        use Estimation::{Dummy, Nested};
        use SelectionRule::{Backward as B, Stepwise as S};
        const fn m(estimation: Estimation, selection: SelectionRule, coding: CodingKind) -> AdjustmentMethod {
            AdjustmentMethod {
                estimation,
                selection,
                coding,
            }
        }
        [
            m(Nested, B, A),
            m(Nested, B, D),
            m(Nested, B, M),
            m(Nested, S, A),
            m(Nested, S, D),
            m(Nested, S, M),
            m(Dummy, B, A),
            m(Dummy, B, D),
            m(Dummy, B, M),
            m(Dummy, S, A),
            m(Dummy, S, D),
            m(Dummy, S, M),
        ]
    };

    pub fn name(&self) -> String {
        let e = match self.estimation {
            Estimation::Nested => 'N',
            Estimation::Dummy => 'D',
        };
        let s = match self.selection {
            SelectionRule::Backward => 'B',
            SelectionRule::Stepwise => 'S',
        };
        let c = match self.coding {
            CodingKind::NestedAsc => 'A',
            CodingKind::NestedDesc => 'D',
            _ => 'M',
        };
        [e, s, c].iter().collect()
    }

    pub fn parse(name: &str) -> Option<AdjustmentMethod> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(name))
    }

    /// Coding of the re-estimated final model.
    pub fn final_coding(&self) -> CodingKind {
        match self.estimation {
            Estimation::Nested => self.coding,
            Estimation::Dummy => CodingKind::Dummy,
        }
    }
}

impl fmt::Display for AdjustmentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub entry_p: f64,
    pub stay_p: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            entry_p: 0.05,
            stay_p: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedModel {
    pub method: AdjustmentMethod,
    pub groupings: Vec<Grouping>,
    pub codings: Vec<VariableCoding>,
    /// Final training design.
    pub design: DesignMatrix,
    pub fit: ModelFit,
    /// Labels of the columns removed from the selection design, aliased
    /// columns first, then in elimination order.
    pub removed: Vec<ColumnLabel>,
    pub dropped_variables: Vec<String>,
}

/// Drops aliased columns, reporting their indices.
pub fn drop_aliased(design: &DesignMatrix, response: &Response) -> (DesignMatrix, Vec<usize>) {
    let aliased = aliased_columns(design, response);
    if aliased.is_empty() {
        return (design.clone(), aliased);
    }
    let keep: Vec<usize> = (1..design.n_cols()).filter(|j| !aliased.contains(j)).collect();
    (design.select_columns(&keep), aliased)
}

/// Codes the variables with the method's nested coding, eliminates
/// attributes with its selection rule (each removed column joins the two
/// adjacent blocks it separated) and re-estimates the merged grouping under
/// the method's estimation coding.
pub fn apply_adjustment(
    method: AdjustmentMethod,
    view: AttributeView<'_>,
    response: &Response,
    thresholds: Thresholds,
) -> Result<AdjustedModel> {
    let mut groupings: Vec<Grouping> = view.variables.iter().map(|v| Grouping::full(v.n_attributes())).collect();
    let codings = |kind: CodingKind, groupings: &[Grouping]| -> Vec<VariableCoding> {
        groupings
            .iter()
            .map(|g| VariableCoding::Indicator {
                kind,
                grouping: g.clone(),
            })
            .collect()
    };
    let design = encode_view(view, &codings(method.coding, &groupings))?;
    let (selection_design, aliased) = drop_aliased(&design, response);
    let selection = match method.selection {
        SelectionRule::Backward => backward_adjust(&selection_design, response, thresholds.stay_p)?,
        SelectionRule::Stepwise => stepwise_adjust(&selection_design, response, thresholds.entry_p, thresholds.stay_p)?,
    };
    let mut removed: Vec<ColumnLabel> = aliased.iter().map(|&j| design.labels()[j].clone()).collect();
    removed.extend(selection.removed.iter().map(|&j| selection_design.labels()[j].clone()));
    for label in &removed {
        let v = view
            .variables
            .iter()
            .position(|var| var.name == label.variable)
            .ok_or_else(|| Error::Fit(format!("unknown variable {}", label.variable)))?;
        let b = label
            .boundary
            .ok_or_else(|| Error::Fit(format!("{label} is not a nested column")))?;
        groupings[v].merge(b);
    }
    let final_codings = codings(method.final_coding(), &groupings);
    let (final_design, _) = drop_aliased(&encode_view(view, &final_codings)?, response);
    let start = (method.estimation == Estimation::Nested).then(|| selection.fit.beta.clone());
    let fit = fit_with(&final_design, response, &FitOptions::default(), start.as_deref())?;
    let mut dropped_variables = selection.dropped_variables.clone();
    for v in final_design.degenerate_variables() {
        if !dropped_variables.contains(v) {
            dropped_variables.push(v.clone());
        }
    }
    Ok(AdjustedModel {
        method,
        groupings,
        codings: final_codings,
        design: final_design,
        fit,
        removed,
        dropped_variables,
    })
}
