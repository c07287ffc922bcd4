//! Design matrices for the three estimation families: REG (raw values with
//! mean imputation), LOG (attribute logit) and GRP (dummy or nested
//! indicator coding of attributes).

use std::fmt;

use crate::binning::{apply_binning, BinningMap, VariableBinning};
use crate::dataio::{Dataset, Values};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodingKind {
    Reg,
    Log,
    Dummy,
    NestedDesc,
    NestedAsc,
    NestedMono,
}

impl CodingKind {
    pub const ALL: [CodingKind; 6] = [
        CodingKind::Reg,
        CodingKind::Log,
        CodingKind::Dummy,
        CodingKind::NestedDesc,
        CodingKind::NestedAsc,
        CodingKind::NestedMono,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CodingKind::Reg => "REG",
            CodingKind::Log => "LOG",
            CodingKind::Dummy => "DUMMY",
            CodingKind::NestedDesc => "NESTED_DESC",
            CodingKind::NestedAsc => "NESTED_ASC",
            CodingKind::NestedMono => "NESTED_MONO",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(s))
    }

    pub fn is_indicator(self) -> bool {
        !matches!(self, CodingKind::Reg | CodingKind::Log)
    }

    pub fn is_nested(self) -> bool {
        matches!(
            self,
            CodingKind::NestedDesc | CodingKind::NestedAsc | CodingKind::NestedMono
        )
    }
}

impl fmt::Display for CodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the LOG family substitutes for an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogTransform {
    /// `ln((bad + s) / (good + s))`
    #[default]
    Logit,
    /// `ln(dist_good / dist_bad)`
    Woe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnLabel {
    pub variable: String,
    pub term: String,
    pub kind: CodingKind,
    /// For nested columns: the attribute id where the upper block starts.
    pub boundary: Option<usize>,
}

impl ColumnLabel {
    fn intercept() -> Self {
        ColumnLabel {
            variable: String::new(),
            term: "Intercept".into(),
            kind: CodingKind::Reg,
            boundary: None,
        }
    }

    pub fn is_intercept(&self) -> bool {
        self.variable.is_empty()
    }
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_intercept() {
            f.write_str(&self.term)
        } else {
            write!(f, "{}:{}", self.variable, self.term)
        }
    }
}

/// Row-major design with the intercept in column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    labels: Vec<ColumnLabel>,
    values: Vec<f64>,
    n_rows: usize,
    /// Variables that produced no columns (a single attribute or block).
    degenerate: Vec<String>,
    /// Variables left out by the coding (categoricals under REG).
    excluded: Vec<String>,
}

impl DesignMatrix {
    /// Assembles a design from non-intercept columns.
    pub fn from_columns(labels: Vec<ColumnLabel>, columns: Vec<Vec<f64>>, n_rows: usize) -> Result<Self> {
        if labels.len() != columns.len() || columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Coding("column lengths do not match".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Coding("non-finite design value".into()));
        }
        let n_cols = columns.len() + 1;
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            values.push(1.0);
            values.extend(columns.iter().map(|c| c[i]));
        }
        let mut all = Vec::with_capacity(n_cols);
        all.push(ColumnLabel::intercept());
        all.extend(labels);
        Ok(DesignMatrix {
            labels: all,
            values,
            n_rows,
            degenerate: Vec::new(),
            excluded: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.labels.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn labels(&self) -> &[ColumnLabel] {
        &self.labels
    }

    pub fn degenerate_variables(&self) -> &[String] {
        &self.degenerate
    }

    pub fn excluded_variables(&self) -> &[String] {
        &self.excluded
    }

    /// Keeps the intercept and the listed non-intercept columns, in order.
    pub fn select_columns(&self, keep: &[usize]) -> DesignMatrix {
        let p = self.n_cols();
        let mut cols = vec![0];
        cols.extend(keep.iter().copied().filter(|&j| j != 0 && j < p));
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        DesignMatrix {
            labels: cols.iter().map(|&j| self.labels[j].clone()).collect(),
            values,
            n_rows: self.n_rows,
            degenerate: self.degenerate.clone(),
            excluded: self.excluded.clone(),
        }
    }
}

/// Training means used to impute missing numeric values.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeans {
    pub means: Vec<(String, f64)>,
}

impl TrainMeans {
    /// Means of the listed numeric columns over non-missing training values.
    pub fn fit(train: &Dataset, variables: &[&str]) -> Result<TrainMeans> {
        let mut means = Vec::new();
        for &name in variables {
            let col = train
                .column(name)
                .ok_or_else(|| Error::Coding(format!("column {name} not found")))?;
            let Values::Numeric(v) = &col.values else { continue };
            let (sum, n) = v.iter().flatten().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                return Err(Error::AllMissing(name.to_string()));
            }
            means.push((name.to_string(), sum / n as f64));
        }
        Ok(TrainMeans { means })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.means.iter().find(|(n, _)| n == name).map(|(_, m)| *m)
    }
}

/// Raw numeric values, missing replaced by the training mean. Categorical
/// variables are excluded and listed in [`DesignMatrix::excluded_variables`].
pub fn encode_reg(dataset: &Dataset, variables: &[&str], means: &TrainMeans) -> Result<DesignMatrix> {
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    let mut excluded = Vec::new();
    for &name in variables {
        let col = dataset
            .column(name)
            .ok_or_else(|| Error::Coding(format!("column {name} not found")))?;
        match &col.values {
            Values::Text(_) => excluded.push(name.to_string()),
            Values::Numeric(v) => {
                let mean = means
                    .get(name)
                    .ok_or_else(|| Error::Coding(format!("no training mean for {name}")))?;
                columns.push(v.iter().map(|x| x.unwrap_or(mean)).collect());
                labels.push(ColumnLabel {
                    variable: name.to_string(),
                    term: "value".into(),
                    kind: CodingKind::Reg,
                    boundary: None,
                });
            }
        }
    }
    let mut d = DesignMatrix::from_columns(labels, columns, dataset.n_rows())?;
    d.excluded = excluded;
    Ok(d)
}

/// Contiguous blocks of attribute ids. `boundaries` holds the ids where a
/// new block starts (sorted, within `1..n_attributes`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grouping {
    pub n_attributes: usize,
    pub boundaries: Vec<usize>,
}

impl Grouping {
    /// Every attribute its own block.
    pub fn full(n_attributes: usize) -> Grouping {
        Grouping {
            n_attributes,
            boundaries: (1..n_attributes).collect(),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn block_of(&self, attribute: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= attribute)
    }

    /// Attribute id ranges of the blocks.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut starts = vec![0];
        starts.extend(&self.boundaries);
        starts.push(self.n_attributes);
        starts.windows(2).map(|w| w[0]..w[1]).collect()
    }

    /// Joins the two blocks meeting at `boundary`.
    pub fn merge(&mut self, boundary: usize) {
        self.boundaries.retain(|&b| b != boundary);
    }
}

/// How one binned variable becomes design columns.
#[derive(Debug, Clone, PartialEq)]
pub enum VariableCoding {
    Log { transform: LogTransform, smoothing: f64 },
    Indicator { kind: CodingKind, grouping: Grouping },
}

fn block_counts(var: &VariableBinning, grouping: &Grouping) -> Vec<(u64, u64)> {
    grouping
        .blocks()
        .into_iter()
        .map(|r| {
            var.attributes[r]
                .iter()
                .fold((0, 0), |(g, b), s| (g + s.n_good, b + s.n_bad))
        })
        .collect()
}

/// Dummy reference block: lowest training default rate, ties to the lowest id.
pub fn reference_block(var: &VariableBinning, grouping: &Grouping) -> usize {
    let counts = block_counts(var, grouping);
    let rate = |(g, b): (u64, u64)| if g + b == 0 { 0.0 } else { b as f64 / (g + b) as f64 };
    let mut best = 0;
    for k in 1..counts.len() {
        if rate(counts[k]) < rate(counts[best]) {
            best = k;
        }
    }
    best
}

fn block_label(var: &VariableBinning, range: std::ops::Range<usize>) -> String {
    if range.len() == 1 {
        var.attribute_label(range.start)
    } else {
        let ids: Vec<String> = range.map(|a| a.to_string()).collect();
        format!("attributes {}", ids.join("+"))
    }
}

/// Columns for one variable given its attribute ids.
pub fn encode_variable(
    var: &VariableBinning,
    coding: &VariableCoding,
    ids: &[u16],
) -> Result<(Vec<ColumnLabel>, Vec<Vec<f64>>)> {
    let k = var.n_attributes();
    if let Some(&bad) = ids.iter().find(|&&a| usize::from(a) >= k) {
        return Err(Error::Coding(format!("{}: attribute {bad} not in binning map", var.name)));
    }
    match coding {
        VariableCoding::Log { transform, smoothing } => {
            let table = match transform {
                LogTransform::Logit => var.logits(*smoothing),
                LogTransform::Woe => var.woe(*smoothing),
            };
            let label = ColumnLabel {
                variable: var.name.clone(),
                term: match transform {
                    LogTransform::Logit => "logit".into(),
                    LogTransform::Woe => "woe".into(),
                },
                kind: CodingKind::Log,
                boundary: None,
            };
            Ok((vec![label], vec![ids.iter().map(|&a| table[usize::from(a)]).collect()]))
        }
        VariableCoding::Indicator { kind, grouping } => {
            if grouping.n_attributes != k {
                return Err(Error::Coding(format!("{}: grouping does not match binning", var.name)));
            }
            let blocks = grouping.blocks();
            let m = blocks.len();
            let block: Vec<usize> = ids.iter().map(|&a| grouping.block_of(usize::from(a))).collect();
            let mut labels = Vec::new();
            let mut columns = Vec::new();
            let mut push = |term: String, boundary: Option<usize>, f: &dyn Fn(usize) -> bool| {
                labels.push(ColumnLabel {
                    variable: var.name.clone(),
                    term,
                    kind: *kind,
                    boundary,
                });
                columns.push(block.iter().map(|&g| if f(g) { 1.0 } else { 0.0 }).collect());
            };
            match kind {
                CodingKind::Dummy => {
                    let r = reference_block(var, grouping);
                    for (g, range) in blocks.iter().enumerate() {
                        if g != r {
                            push(block_label(var, range.clone()), None, &|x| x == g);
                        }
                    }
                }
                // 0-based block g: column i (1-based) is [g >= i]
                CodingKind::NestedDesc => {
                    for i in 1..m {
                        let b = grouping.boundaries[i - 1];
                        push(format!("attr >= {b}"), Some(b), &|g| g >= i);
                    }
                }
                // column i is [g < i]
                CodingKind::NestedAsc => {
                    for i in 1..m {
                        let b = grouping.boundaries[i - 1];
                        push(format!("attr < {b}"), Some(b), &|g| g < i);
                    }
                }
                // column i is [g < m - i]
                CodingKind::NestedMono => {
                    for i in 1..m {
                        let b = grouping.boundaries[m - i - 1];
                        push(format!("attr < {b}"), Some(b), &|g| g < m - i);
                    }
                }
                CodingKind::Reg | CodingKind::Log => {
                    return Err(Error::Coding(format!("{kind} is not an indicator coding")));
                }
            }
            Ok((labels, columns))
        }
    }
}

/// Attribute ids of several variables over the same rows.
#[derive(Debug, Clone, Copy)]
pub struct AttributeView<'a> {
    pub variables: &'a [&'a VariableBinning],
    pub ids: &'a [&'a [u16]],
    pub n_rows: usize,
}

/// Encodes every variable of a view with its own coding.
pub fn encode_view(view: AttributeView<'_>, codings: &[VariableCoding]) -> Result<DesignMatrix> {
    if view.variables.len() != codings.len() || view.ids.len() != codings.len() {
        return Err(Error::Coding("one coding per variable required".into()));
    }
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    let mut degenerate = Vec::new();
    for ((var, ids), coding) in view.variables.iter().zip(view.ids).zip(codings) {
        let (l, c) = encode_variable(var, coding, ids)?;
        if l.is_empty() {
            degenerate.push(var.name.clone());
        }
        labels.extend(l);
        columns.extend(c);
    }
    let mut d = DesignMatrix::from_columns(labels, columns, view.n_rows)?;
    d.degenerate = degenerate;
    Ok(d)
}

fn binned_view<'a>(
    map: &'a BinningMap,
    binned: &'a crate::binning::BinnedData,
) -> Result<(Vec<&'a VariableBinning>, Vec<&'a [u16]>)> {
    let mut vars = Vec::new();
    let mut ids = Vec::new();
    for (name, col) in binned.names.iter().zip(&binned.attributes) {
        let var = map
            .variable(name)
            .ok_or_else(|| Error::Coding(format!("{name} absent from binning map")))?;
        vars.push(var);
        ids.push(col.as_slice());
    }
    Ok((vars, ids))
}

/// One logit column per binned variable.
pub fn encode_log(dataset: &Dataset, map: &BinningMap) -> Result<DesignMatrix> {
    let binned = apply_binning(map, dataset)?;
    let (vars, ids) = binned_view(map, &binned)?;
    let codings = vec![
        VariableCoding::Log {
            transform: LogTransform::Logit,
            smoothing: map.params.smoothing,
        };
        vars.len()
    ];
    encode_view(
        AttributeView {
            variables: &vars,
            ids: &ids,
            n_rows: binned.n_rows(),
        },
        &codings,
    )
}

/// `k − 1` indicator columns per binned variable with `k` attributes.
pub fn encode_indicator(dataset: &Dataset, map: &BinningMap, kind: CodingKind) -> Result<DesignMatrix> {
    if !kind.is_indicator() {
        return Err(Error::Coding(format!("{kind} is not an indicator coding")));
    }
    let binned = apply_binning(map, dataset)?;
    let (vars, ids) = binned_view(map, &binned)?;
    let codings: Vec<VariableCoding> = vars
        .iter()
        .map(|v| VariableCoding::Indicator {
            kind,
            grouping: Grouping::full(v.n_attributes()),
        })
        .collect();
    encode_view(
        AttributeView {
            variables: &vars,
            ids: &ids,
            n_rows: binned.n_rows(),
        },
        &codings,
    )
}

/// Points-to-double-odds scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreScaling {
    pub base_score: f64,
    pub base_odds: f64,
    pub pdo: f64,
}

impl Default for ScoreScaling {
    fn default() -> Self {
        ScoreScaling {
            base_score: 600.0,
            base_odds: 50.0,
            pdo: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorecardRow {
    pub variable: String,
    pub condition: String,
    pub points: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scorecard {
    pub base_points: i64,
    pub rows: Vec<ScorecardRow>,
}

impl Scorecard {
    /// Builds a scorecard from a fitted model whose design was produced by
    /// `codings` (intercept first in `beta`). Higher points mean lower risk;
    /// each variable's lowest partial score is 0.
    pub fn build(
        variables: &[&VariableBinning],
        codings: &[VariableCoding],
        beta: &[f64],
        scaling: ScoreScaling,
    ) -> Result<Scorecard> {
        let factor = scaling.pdo / std::f64::consts::LN_2;
        let offset = scaling.base_score - factor * scaling.base_odds.ln();
        let mut next = 1;
        let mut base = offset - factor * beta.first().copied().unwrap_or(0.0);
        let mut rows = Vec::new();
        for (var, coding) in variables.iter().zip(codings) {
            let k = var.n_attributes();
            let ids: Vec<u16> = (0..k as u16).collect();
            let (labels, columns) = encode_variable(var, coding, &ids)?;
            let b = beta
                .get(next..next + labels.len())
                .ok_or_else(|| Error::Coding("coefficient vector too short".into()))?;
            next += labels.len();
            let partial: Vec<f64> = (0..k)
                .map(|a| -factor * columns.iter().zip(b).map(|(c, bj)| c[a] * bj).sum::<f64>())
                .collect();
            let shift = partial.iter().copied().fold(f64::INFINITY, f64::min);
            base += shift;
            for (a, p) in partial.iter().enumerate() {
                rows.push(ScorecardRow {
                    variable: var.name.clone(),
                    condition: var.attribute_label(a),
                    points: (p - shift).round() as i64,
                });
            }
        }
        Ok(Scorecard {
            base_points: base.round() as i64,
            rows,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("variable,condition,points\n");
        s.push_str(&format!("(base),,{}\n", self.base_points));
        for r in &self.rows {
            s.push_str(&format!("{},\"{}\",{}\n", r.variable, r.condition.replace('"', "\"\""), r.points));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::{AttributeStats, BinRule, MissingRule};

    /// Four attributes; rates 40%, 30%, 20%, 10% so the last is lowest risk.
    fn four_groups() -> VariableBinning {
        let stats = [(60, 40), (70, 30), (80, 20), (90, 10)];
        VariableBinning {
            name: "v".into(),
            rule: BinRule::Continuous { cuts: vec![1.0, 2.0, 3.0] },
            missing: MissingRule::Merged(0),
            attributes: stats
                .iter()
                .map(|&(g, b)| AttributeStats { n_good: g, n_bad: b })
                .collect(),
        }
    }

    fn table(kind: CodingKind) -> Vec<Vec<f64>> {
        let var = four_groups();
        let coding = VariableCoding::Indicator {
            kind,
            grouping: Grouping::full(4),
        };
        let (_, cols) = encode_variable(&var, &coding, &[0, 1, 2, 3]).unwrap();
        (0..4).map(|r| cols.iter().map(|c| c[r]).collect()).collect()
    }

    #[test]
    fn dummy_matches_reference_coding_table() {
        assert_eq!(
            table(CodingKind::Dummy),
            vec![vec![1., 0., 0.], vec![0., 1., 0.], vec![0., 0., 1.], vec![0., 0., 0.]]
        );
    }

    #[test]
    fn nested_descending_table() {
        assert_eq!(
            table(CodingKind::NestedDesc),
            vec![vec![0., 0., 0.], vec![1., 0., 0.], vec![1., 1., 0.], vec![1., 1., 1.]]
        );
    }

    #[test]
    fn nested_ascending_table() {
        assert_eq!(
            table(CodingKind::NestedAsc),
            vec![vec![1., 1., 1.], vec![0., 1., 1.], vec![0., 0., 1.], vec![0., 0., 0.]]
        );
    }

    #[test]
    fn nested_monotonic_table() {
        assert_eq!(
            table(CodingKind::NestedMono),
            vec![vec![1., 1., 1.], vec![1., 1., 0.], vec![1., 0., 0.], vec![0., 0., 0.]]
        );
    }

    #[test]
    fn merged_grouping_drops_the_boundary_column() {
        let var = four_groups();
        let mut g = Grouping::full(4);
        g.merge(2);
        assert_eq!(g.blocks(), vec![0..1, 1..3, 3..4]);
        for kind in [CodingKind::NestedDesc, CodingKind::NestedAsc, CodingKind::NestedMono] {
            let full = encode_variable(
                &var,
                &VariableCoding::Indicator {
                    kind,
                    grouping: Grouping::full(4),
                },
                &[0, 1, 2, 3],
            )
            .unwrap();
            let merged = encode_variable(
                &var,
                &VariableCoding::Indicator {
                    kind,
                    grouping: g.clone(),
                },
                &[0, 1, 2, 3],
            )
            .unwrap();
            let kept: Vec<&Vec<f64>> = full
                .0
                .iter()
                .zip(&full.1)
                .filter(|(l, _)| l.boundary != Some(2))
                .map(|(_, c)| c)
                .collect();
            assert_eq!(kept, merged.1.iter().collect::<Vec<_>>(), "{kind}");
        }
    }

    #[test]
    fn single_attribute_is_degenerate() {
        let var = VariableBinning {
            attributes: vec![AttributeStats { n_good: 5, n_bad: 5 }],
            rule: BinRule::Continuous { cuts: vec![] },
            ..four_groups()
        };
        let vars = [&var];
        let ids: [&[u16]; 1] = [&[0, 0, 0]];
        let d = encode_view(
            AttributeView {
                variables: &vars,
                ids: &ids,
                n_rows: 3,
            },
            &[VariableCoding::Indicator {
                kind: CodingKind::Dummy,
                grouping: Grouping::full(1),
            }],
        )
        .unwrap();
        assert_eq!(d.n_cols(), 1);
        assert_eq!(d.degenerate_variables(), &["v".to_string()]);
    }

    #[test]
    fn log_values() {
        let even = AttributeStats { n_good: 50, n_bad: 50 };
        assert_eq!(even.logit(0.5), 0.0);
        let s = AttributeStats { n_good: 90, n_bad: 10 };
        assert_eq!(s.logit(0.5), (10.5f64 / 90.5).ln());
        assert!((s.logit(0.5) - (-2.1542)).abs() < 5e-4);
    }

    #[test]
    fn reg_imputes_training_mean() {
        use crate::dataio::parse_csv;
        let train = parse_csv("period,target,x\n200501,0,0\n200501,1,4\n", None).unwrap();
        let valid = parse_csv("period,target,x\n200502,0,\n200502,0,1\n", None).unwrap();
        let means = TrainMeans::fit(&train, &["x"]).unwrap();
        let d = encode_reg(&valid, &["x"], &means).unwrap();
        assert_eq!(d.column(1), vec![2.0, 1.0]);
        let d = encode_reg(&parse_csv("period,target,x\n200501,0,1\n200501,1,2\n200501,1,\n200501,1,3\n", None).unwrap(), &["x"], &means)
            .unwrap();
        assert_eq!(d.column(1), vec![1.0, 2.0, 2.0, 3.0]);
        assert!(d.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn reg_rejects_all_missing_and_excludes_categoricals() {
        use crate::dataio::parse_csv;
        let train = parse_csv("period,target,x,c\n200501,0,,a\n200501,1,,b\n", None).unwrap();
        assert!(matches!(TrainMeans::fit(&train, &["x"]), Err(Error::AllMissing(_))));
        let means = TrainMeans::fit(&train, &["c"]).unwrap();
        let d = encode_reg(&train, &["c"], &means).unwrap();
        assert_eq!(d.n_cols(), 1);
        assert_eq!(d.excluded_variables(), &["c".to_string()]);
    }

    #[test]
    fn scorecard_points_are_non_negative() {
        let var = four_groups();
        let vars = [&var];
        let codings = [VariableCoding::Log {
            transform: LogTransform::Logit,
            smoothing: 0.5,
        }];
        let card = Scorecard::build(&vars, &codings, &[-2.0, 1.0], ScoreScaling::default()).unwrap();
        assert_eq!(card.rows.len(), 4);
        assert!(card.rows.iter().all(|r| r.points >= 0));
        assert_eq!(card.rows.iter().map(|r| r.points).min(), Some(0));
        // riskiest attribute earns the fewest points
        assert_eq!(card.rows[0].points, 0);
        // 20 points double the odds: difference of logits times 20/ln 2
        let expected = 20.0 / std::f64::consts::LN_2 * (var.attributes[0].logit(0.5) - var.attributes[3].logit(0.5));
        assert_eq!(card.rows[3].points, expected.round() as i64);
    }
}
