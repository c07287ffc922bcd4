//! Supervised discretisation: entropy-driven cut points for numeric
//! variables, risk-ordered merging of categorical levels, and the fitted
//! [`BinningMap`] that turns raw values into attribute ids.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::dataio::{Column, Dataset, Values};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningParams {
    pub max_bins: usize,
    /// Minimum share of training rows per attribute.
    pub min_share: f64,
    /// Additive smoothing per cell in attribute logits.
    pub smoothing: f64,
}

impl Default for BinningParams {
    fn default() -> Self {
        BinningParams {
            max_bins: 7,
            min_share: 0.05,
            smoothing: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCuts {
    pub cuts: Vec<f64>,
    /// Fewer than two distinct values.
    pub degenerate: bool,
}

fn binary_entropy(n: f64, bad: f64) -> f64 {
    if n <= 0.0 || bad <= 0.0 || bad >= n {
        return 0.0;
    }
    let p = bad / n;
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

/// `n·H` of a cell; information gain of a split is the drop in the sum of
/// these over the bins.
fn weighted_entropy(n: f64, bad: f64) -> f64 {
    n * binary_entropy(n, bad)
}

/// Recursive best-first binary splitting on information gain. Cut points
/// are midpoints between consecutive distinct values; a value `x` belongs
/// to the attribute `#{cut ≤ x}`.
pub fn entropy_bin(
    values: &[f64],
    targets: &[u8],
    max_bins: usize,
    min_share: f64,
) -> Result<EntropyCuts> {
    if values.len() != targets.len() {
        return Err(Error::Binning("values and targets differ in length".into()));
    }
    let min_count = (min_share * values.len() as f64).ceil() as usize;
    entropy_cuts(values, targets, max_bins, min_count)
}

pub(crate) fn entropy_cuts(
    values: &[f64],
    targets: &[u8],
    max_bins: usize,
    min_count: usize,
) -> Result<EntropyCuts> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Binning("non-finite value".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    // distinct values with (count, bads)
    let mut distinct: Vec<(f64, f64, f64)> = Vec::new();
    for &i in &order {
        let bad = f64::from(targets[i]);
        match distinct.last_mut() {
            Some(last) if last.0 == values[i] => {
                last.1 += 1.0;
                last.2 += bad;
            }
            _ => distinct.push((values[i], 1.0, bad)),
        }
    }
    if distinct.len() < 2 {
        return Ok(EntropyCuts {
            cuts: Vec::new(),
            degenerate: true,
        });
    }
    let mut cum_n = vec![0.0; distinct.len() + 1];
    let mut cum_b = vec![0.0; distinct.len() + 1];
    for (k, d) in distinct.iter().enumerate() {
        cum_n[k + 1] = cum_n[k] + d.1;
        cum_b[k + 1] = cum_b[k] + d.2;
    }
    let min_count = min_count as f64;
    // best split of the distinct-index range [lo, hi): (gain, split index)
    let best_split = |lo: usize, hi: usize| -> Option<(f64, usize)> {
        let (n, b) = (cum_n[hi] - cum_n[lo], cum_b[hi] - cum_b[lo]);
        let parent = weighted_entropy(n, b);
        let mut best: Option<(f64, usize)> = None;
        for s in lo + 1..hi {
            let (nl, bl) = (cum_n[s] - cum_n[lo], cum_b[s] - cum_b[lo]);
            let (nr, br) = (n - nl, b - bl);
            if nl < min_count || nr < min_count {
                continue;
            }
            let gain = parent - weighted_entropy(nl, bl) - weighted_entropy(nr, br);
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, s));
            }
        }
        best.filter(|&(g, _)| g > 1e-12)
    };

    let mut bins: Vec<(usize, usize)> = vec![(0, distinct.len())];
    while bins.len() < max_bins.max(1) {
        let mut choice: Option<(f64, usize, usize)> = None;
        for (bi, &(lo, hi)) in bins.iter().enumerate() {
            if let Some((gain, s)) = best_split(lo, hi) {
                if choice.is_none_or(|(g, _, _)| gain > g) {
                    choice = Some((gain, bi, s));
                }
            }
        }
        let Some((_, bi, s)) = choice else { break };
        let (lo, hi) = bins[bi];
        bins[bi] = (lo, s);
        bins.insert(bi + 1, (s, hi));
    }
    let cuts = bins
        .iter()
        .skip(1)
        .map(|&(lo, _)| 0.5 * (distinct[lo - 1].0 + distinct[lo].0))
        .collect();
    Ok(EntropyCuts {
        cuts,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelGrouping {
    /// Groups ordered by ascending default rate; levels sorted within a group.
    pub groups: Vec<Vec<String>>,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
struct LevelGroup {
    levels: Vec<String>,
    n: f64,
    bad: f64,
}

impl LevelGroup {
    fn rate(&self) -> f64 {
        if self.n > 0.0 {
            self.bad / self.n
        } else {
            0.0
        }
    }

    fn absorb(&mut self, other: LevelGroup) {
        self.levels.extend(other.levels);
        self.levels.sort();
        self.n += other.n;
        self.bad += other.bad;
    }
}

/// Sorts levels by default rate and merges adjacent groups: first the pair
/// with the smallest rate gap until at most `max_groups` remain, then any
/// group under the share floor into its closer-rate neighbour.
pub fn merge_categories(
    levels: &[&str],
    targets: &[u8],
    max_groups: usize,
    min_share: f64,
) -> Result<LevelGrouping> {
    if levels.len() != targets.len() {
        return Err(Error::Binning("levels and targets differ in length".into()));
    }
    let min_count = (min_share * levels.len() as f64).ceil() as usize;
    merge_levels(levels, targets, max_groups, min_count)
}

pub(crate) fn merge_levels(
    levels: &[&str],
    targets: &[u8],
    max_groups: usize,
    min_count: usize,
) -> Result<LevelGrouping> {
    let mut counts: HashMap<&str, (f64, f64)> = HashMap::new();
    for (l, &t) in levels.iter().zip(targets) {
        let e = counts.entry(l).or_insert((0.0, 0.0));
        e.0 += 1.0;
        e.1 += f64::from(t);
    }
    let mut groups: Vec<LevelGroup> = counts
        .into_iter()
        .map(|(l, (n, bad))| LevelGroup {
            levels: vec![l.to_string()],
            n,
            bad,
        })
        .collect();
    groups.sort_by(|a, b| a.rate().total_cmp(&b.rate()).then(a.levels.cmp(&b.levels)));
    let degenerate = groups.len() < 2;

    let merge_at = |groups: &mut Vec<LevelGroup>, i: usize| {
        let right = groups.remove(i + 1);
        groups[i].absorb(right);
    };
    while groups.len() > max_groups.max(1) {
        let i = (0..groups.len() - 1)
            .min_by(|&a, &b| {
                let ga = groups[a + 1].rate() - groups[a].rate();
                let gb = groups[b + 1].rate() - groups[b].rate();
                ga.total_cmp(&gb)
            })
            .expect("at least two groups");
        merge_at(&mut groups, i);
    }
    let min_count = min_count as f64;
    while groups.len() > 1 {
        let Some(i) = (0..groups.len())
            .filter(|&i| groups[i].n < min_count)
            .min_by(|&a, &b| groups[a].n.total_cmp(&groups[b].n))
        else {
            break;
        };
        let left_gap = (i > 0).then(|| groups[i].rate() - groups[i - 1].rate());
        let right_gap = (i + 1 < groups.len()).then(|| groups[i + 1].rate() - groups[i].rate());
        let into_left = match (left_gap, right_gap) {
            (Some(l), Some(r)) => l <= r,
            (Some(_), None) => true,
            _ => false,
        };
        merge_at(&mut groups, if into_left { i - 1 } else { i });
    }
    Ok(LevelGrouping {
        groups: groups.into_iter().map(|g| g.levels).collect(),
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AttributeStats {
    pub n_good: u64,
    pub n_bad: u64,
}

impl AttributeStats {
    pub fn n(&self) -> u64 {
        self.n_good + self.n_bad
    }

    pub fn default_rate(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.n_bad as f64 / self.n() as f64
        }
    }

    /// `ln((bad + s) / (good + s))`.
    pub fn logit(&self, smoothing: f64) -> f64 {
        ((self.n_bad as f64 + smoothing) / (self.n_good as f64 + smoothing)).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BinRule {
    Continuous { cuts: Vec<f64> },
    Categorical { groups: Vec<Vec<String>> },
}

/// Where missing values go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingRule {
    /// A dedicated attribute (always the last one).
    Own(usize),
    /// Shares the attribute with the closest training default rate.
    Merged(usize),
}

impl MissingRule {
    pub fn attribute(self) -> usize {
        match self {
            MissingRule::Own(a) | MissingRule::Merged(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableBinning {
    pub name: String,
    pub rule: BinRule,
    pub missing: MissingRule,
    pub attributes: Vec<AttributeStats>,
}

impl VariableBinning {
    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn degenerate(&self) -> bool {
        self.attributes.len() < 2
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.rule, BinRule::Categorical { .. })
    }

    fn n_value_attributes(&self) -> usize {
        match &self.rule {
            BinRule::Continuous { cuts } => cuts.len() + 1,
            BinRule::Categorical { groups } => groups.len(),
        }
    }

    /// Attribute id of a numeric value.
    pub fn numeric_attribute(&self, x: Option<f64>) -> usize {
        match (x, &self.rule) {
            (None, _) => self.missing.attribute(),
            (Some(x), BinRule::Continuous { cuts }) => cuts.partition_point(|c| *c <= x),
            (Some(x), BinRule::Categorical { .. }) => self.level_attribute(Some(&x.to_string())).0,
        }
    }

    /// Attribute id of a categorical level; the flag reports an unseen level
    /// sent to the largest group.
    pub fn level_attribute(&self, level: Option<&str>) -> (usize, bool) {
        let Some(level) = level else {
            return (self.missing.attribute(), false);
        };
        match &self.rule {
            BinRule::Categorical { groups } => {
                for (g, lv) in groups.iter().enumerate() {
                    if lv.iter().any(|l| l == level) {
                        return (g, false);
                    }
                }
                (self.largest_group(), true)
            }
            BinRule::Continuous { cuts } => match level.parse::<f64>() {
                Ok(x) => (cuts.partition_point(|c| *c <= x), false),
                Err(_) => (self.largest_group(), true),
            },
        }
    }

    fn largest_group(&self) -> usize {
        let k = self.n_value_attributes().max(1);
        (0..k)
            .max_by(|&a, &b| {
                self.attributes[a]
                    .n()
                    .cmp(&self.attributes[b].n())
                    .then(b.cmp(&a))
            })
            .unwrap_or(0)
    }

    pub fn attribute_label(&self, a: usize) -> String {
        let mut label = if a >= self.n_value_attributes() {
            "missing".to_string()
        } else {
            match &self.rule {
                BinRule::Continuous { cuts } => {
                    if cuts.is_empty() {
                        "all values".to_string()
                    } else if a == 0 {
                        format!("< {}", cuts[0])
                    } else if a == cuts.len() {
                        format!(">= {}", cuts[a - 1])
                    } else {
                        format!("[{}, {})", cuts[a - 1], cuts[a])
                    }
                }
                BinRule::Categorical { groups } => format!("in {{{}}}", groups[a].join(", ")),
            }
        };
        if let MissingRule::Merged(m) = self.missing {
            if m == a {
                label.push_str(" or missing");
            }
        }
        label
    }

    pub fn logits(&self, smoothing: f64) -> Vec<f64> {
        self.attributes.iter().map(|s| s.logit(smoothing)).collect()
    }

    /// `ln(dist_good / dist_bad)` with the same smoothing.
    pub fn woe(&self, smoothing: f64) -> Vec<f64> {
        let g: f64 = self.attributes.iter().map(|s| s.n_good as f64).sum();
        let b: f64 = self.attributes.iter().map(|s| s.n_bad as f64).sum();
        self.attributes
            .iter()
            .map(|s| (((s.n_good as f64 + smoothing) / g) / ((s.n_bad as f64 + smoothing) / b)).ln())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinningMap {
    pub params: BinningParams,
    pub variables: Vec<VariableBinning>,
}

impl BinningMap {
    pub fn variable(&self, name: &str) -> Option<&VariableBinning> {
        self.variables.iter().find(|v| v.name == name)
    }
}

/// Fits one variable on training rows.
pub fn fit_variable(column: &Column, targets: &[u8], params: &BinningParams) -> Result<VariableBinning> {
    let n_total = targets.len();
    let min_count = (params.min_share * n_total as f64).ceil() as usize;
    let mut missing_rows = Vec::new();
    let (rule, mut attributes, present): (BinRule, Vec<AttributeStats>, Vec<(usize, usize)>) =
        match &column.values {
            Values::Numeric(v) => {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                let mut idx = Vec::new();
                for (i, x) in v.iter().enumerate() {
                    match x {
                        Some(x) => {
                            xs.push(*x);
                            ys.push(targets[i]);
                            idx.push(i);
                        }
                        None => missing_rows.push(i),
                    }
                }
                let cuts = if xs.is_empty() {
                    Vec::new()
                } else {
                    entropy_cuts(&xs, &ys, params.max_bins, min_count)?.cuts
                };
                let mut stats = vec![AttributeStats::default(); cuts.len() + 1];
                let mut present = Vec::with_capacity(xs.len());
                for (k, &x) in xs.iter().enumerate() {
                    let a = cuts.partition_point(|c| *c <= x);
                    present.push((idx[k], a));
                    bump(&mut stats[a], ys[k]);
                }
                if xs.is_empty() {
                    stats.clear();
                }
                (BinRule::Continuous { cuts }, stats, present)
            }
            Values::Text(v) => {
                let mut ls = Vec::new();
                let mut ys = Vec::new();
                let mut idx = Vec::new();
                for (i, l) in v.iter().enumerate() {
                    match l {
                        Some(l) => {
                            ls.push(l.as_str());
                            ys.push(targets[i]);
                            idx.push(i);
                        }
                        None => missing_rows.push(i),
                    }
                }
                let grouping = merge_levels(&ls, &ys, params.max_bins, min_count)?;
                let lookup: HashMap<&str, usize> = grouping
                    .groups
                    .iter()
                    .enumerate()
                    .flat_map(|(g, lv)| lv.iter().map(move |l| (l.as_str(), g)))
                    .collect();
                let mut stats = vec![AttributeStats::default(); grouping.groups.len()];
                let mut present = Vec::with_capacity(ls.len());
                for (k, l) in ls.iter().enumerate() {
                    let a = lookup[l];
                    present.push((idx[k], a));
                    bump(&mut stats[a], ys[k]);
                }
                (
                    BinRule::Categorical {
                        groups: grouping.groups,
                    },
                    stats,
                    present,
                )
            }
        };
    drop(present);

    let mut miss = AttributeStats::default();
    for &i in &missing_rows {
        bump(&mut miss, targets[i]);
    }
    let missing = if attributes.is_empty() || (miss.n() > 0 && miss.n() as usize >= min_count) {
        attributes.push(miss);
        MissingRule::Own(attributes.len() - 1)
    } else {
        let rate = if miss.n() > 0 {
            miss.default_rate()
        } else {
            let (n, b) = attributes
                .iter()
                .fold((0u64, 0u64), |(n, b), s| (n + s.n(), b + s.n_bad));
            b as f64 / n.max(1) as f64
        };
        let a = (0..attributes.len())
            .min_by(|&x, &y| {
                (attributes[x].default_rate() - rate)
                    .abs()
                    .total_cmp(&(attributes[y].default_rate() - rate).abs())
            })
            .expect("at least one attribute");
        attributes[a].n_good += miss.n_good;
        attributes[a].n_bad += miss.n_bad;
        MissingRule::Merged(a)
    };
    Ok(VariableBinning {
        name: column.name.clone(),
        rule,
        missing,
        attributes,
    })
}

fn bump(s: &mut AttributeStats, y: u8) {
    if y == 1 {
        s.n_bad += 1;
    } else {
        s.n_good += 1;
    }
}

/// Fits every predictor column (numeric and categorical) of the training set.
pub fn fit_binning(train: &Dataset, params: &BinningParams) -> Result<BinningMap> {
    let targets = train.targets()?;
    let variables = train
        .predictors()
        .map(|c| fit_variable(c, &targets, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(BinningMap {
        params: *params,
        variables,
    })
}

/// Attribute ids per variable for every row of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedData {
    pub names: Vec<String>,
    pub attributes: Vec<Vec<u16>>,
    pub targets: Vec<u8>,
    /// Per variable, rows whose categorical level was unseen in training.
    pub unseen_levels: Vec<usize>,
}

impl BinnedData {
    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub fn apply_binning(map: &BinningMap, dataset: &Dataset) -> Result<BinnedData> {
    let targets = dataset.targets()?;
    let mut names = Vec::with_capacity(map.variables.len());
    let mut attributes = Vec::with_capacity(map.variables.len());
    let mut unseen_levels = Vec::with_capacity(map.variables.len());
    for var in &map.variables {
        let col = dataset
            .column(&var.name)
            .ok_or_else(|| Error::Binning(format!("column {} missing from dataset", var.name)))?;
        let mut unseen = 0;
        let ids: Vec<u16> = match &col.values {
            Values::Numeric(v) => v.iter().map(|x| var.numeric_attribute(*x) as u16).collect(),
            Values::Text(v) => v
                .iter()
                .map(|l| {
                    let (a, new) = var.level_attribute(l.as_deref());
                    unseen += usize::from(new);
                    a as u16
                })
                .collect(),
        };
        names.push(var.name.clone());
        attributes.push(ids);
        unseen_levels.push(unseen);
    }
    Ok(BinnedData {
        names,
        attributes,
        targets,
        unseen_levels,
    })
}

impl BinningMap {
    /// Human-readable, re-parsable text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(
            s,
            "params max_bins={} min_share={} smoothing={}",
            p.max_bins, p.min_share, p.smoothing
        );
        for v in &self.variables {
            let kind = if v.is_categorical() { "categorical" } else { "continuous" };
            let _ = writeln!(s, "variable {} {}", v.name, kind);
            match &v.rule {
                BinRule::Continuous { cuts } => {
                    let c: Vec<String> = cuts.iter().map(|c| c.to_string()).collect();
                    let _ = writeln!(s, "cuts {}", c.join(" "));
                }
                BinRule::Categorical { groups } => {
                    for (g, lv) in groups.iter().enumerate() {
                        let _ = writeln!(s, "group {g}\t{}", lv.join("\t"));
                    }
                }
            }
            match v.missing {
                MissingRule::Own(a) => {
                    let _ = writeln!(s, "missing own {a}");
                }
                MissingRule::Merged(a) => {
                    let _ = writeln!(s, "missing merged {a}");
                }
            }
            for (a, st) in v.attributes.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "attribute {a} good={} bad={} logit={:.6} label={}",
                    st.n_good,
                    st.n_bad,
                    st.logit(p.smoothing),
                    v.attribute_label(a)
                );
            }
            let _ = writeln!(s, "end");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<BinningMap> {
        let err = |line: usize, message: String| Error::Parse { line, message };
        let mut params = None;
        let mut variables = Vec::new();
        let mut current: Option<(String, bool, Vec<f64>, Vec<Vec<String>>, Option<MissingRule>, Vec<AttributeStats>)> =
            None;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, rest) = line.split_once([' ', '\t']).unwrap_or((line, ""));
            match head {
                "params" => {
                    let mut p = BinningParams::default();
                    for kv in rest.split_whitespace() {
                        let (k, v) = kv.split_once('=').ok_or_else(|| err(ln, format!("bad param {kv}")))?;
                        let bad = |_| err(ln, format!("bad value in {kv}"));
                        match k {
                            "max_bins" => p.max_bins = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                            "min_share" => p.min_share = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                            "smoothing" => p.smoothing = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                            _ => return Err(err(ln, format!("unknown param {k}"))),
                        }
                    }
                    params = Some(p);
                }
                "variable" => {
                    let (name, kind) = rest
                        .rsplit_once(' ')
                        .ok_or_else(|| err(ln, "expected `variable NAME KIND`".into()))?;
                    let categorical = match kind {
                        "categorical" => true,
                        "continuous" => false,
                        k => return Err(err(ln, format!("unknown kind {k}"))),
                    };
                    current = Some((name.to_string(), categorical, Vec::new(), Vec::new(), None, Vec::new()));
                }
                "cuts" => {
                    let cur = current.as_mut().ok_or_else(|| err(ln, "cuts outside variable".into()))?;
                    for c in rest.split_whitespace() {
                        cur.2.push(c.parse().map_err(|_| err(ln, format!("bad cut {c}")))?);
                    }
                }
                "group" => {
                    let cur = current.as_mut().ok_or_else(|| err(ln, "group outside variable".into()))?;
                    let mut parts = rest.split('\t');
                    parts.next();
                    cur.3.push(parts.map(str::to_string).collect());
                }
                "missing" => {
                    let cur = current.as_mut().ok_or_else(|| err(ln, "missing outside variable".into()))?;
                    let mut it = rest.split_whitespace();
                    let how = it.next().unwrap_or("");
                    let a: usize = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(ln, "bad missing attribute".into()))?;
                    cur.4 = Some(match how {
                        "own" => MissingRule::Own(a),
                        "merged" => MissingRule::Merged(a),
                        h => return Err(err(ln, format!("unknown missing rule {h}"))),
                    });
                }
                "attribute" => {
                    let cur = current.as_mut().ok_or_else(|| err(ln, "attribute outside variable".into()))?;
                    let mut st = AttributeStats::default();
                    for kv in rest.split_whitespace() {
                        if let Some(v) = kv.strip_prefix("good=") {
                            st.n_good = v.parse().map_err(|_| err(ln, "bad good count".into()))?;
                        } else if let Some(v) = kv.strip_prefix("bad=") {
                            st.n_bad = v.parse().map_err(|_| err(ln, "bad bad count".into()))?;
                        }
                    }
                    cur.5.push(st);
                }
                "end" => {
                    let (name, categorical, cuts, groups, missing, attributes) =
                        current.take().ok_or_else(|| err(ln, "end without variable".into()))?;
                    let missing = missing.ok_or_else(|| err(ln, format!("{name}: no missing rule")))?;
                    if missing.attribute() >= attributes.len() {
                        return Err(err(ln, format!("{name}: missing attribute out of range")));
                    }
                    let rule = if categorical {
                        BinRule::Categorical { groups }
                    } else {
                        BinRule::Continuous { cuts }
                    };
                    variables.push(VariableBinning {
                        name,
                        rule,
                        missing,
                        attributes,
                    });
                }
                other => return Err(err(ln, format!("unknown directive {other}"))),
            }
        }
        if current.is_some() {
            return Err(err(text.lines().count(), "unterminated variable block".into()));
        }
        Ok(BinningMap {
            params: params.unwrap_or_default(),
            variables,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ColumnKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h(n: f64, b: f64) -> f64 {
        if b == 0.0 || b == n {
            0.0
        } else {
            let p = b / n;
            -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
        }
    }

    /// Exhaustive scan of every midpoint, information gain from the
    /// textbook definition.
    fn oracle_best_cut(values: &[f64], targets: &[u8], min_count: usize) -> f64 {
        let mut d: Vec<f64> = values.to_vec();
        d.sort_by(f64::total_cmp);
        d.dedup();
        let n = values.len() as f64;
        let b: f64 = targets.iter().map(|&t| f64::from(t)).sum();
        let mut best = (f64::MIN, f64::NAN);
        for w in d.windows(2) {
            let cut = 0.5 * (w[0] + w[1]);
            let (mut nl, mut bl) = (0.0, 0.0);
            for (x, &t) in values.iter().zip(targets) {
                if *x < cut {
                    nl += 1.0;
                    bl += f64::from(t);
                }
            }
            if (nl as usize) < min_count || ((n - nl) as usize) < min_count {
                continue;
            }
            let gain = h(n, b) - nl / n * h(nl, bl) - (n - nl) / n * h(n - nl, b - bl);
            if gain > best.0 + 1e-15 {
                best = (gain, cut);
            }
        }
        best.1
    }

    #[test]
    fn perfect_separation_single_cut() {
        let values = [1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0, 9.0];
        let targets = [0, 0, 0, 0, 1, 1, 1, 1];
        let out = entropy_bin(&values, &targets, 7, 0.05).unwrap();
        assert_eq!(out.cuts, vec![5.0]);
        assert!(!out.degenerate);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let out = entropy_bin(&[3.0; 10], &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 7, 0.05).unwrap();
        assert!(out.cuts.is_empty());
        assert!(out.degenerate);
    }

    #[test]
    fn two_bins_match_exhaustive_scan() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..200).map(|_| (rng.random::<f64>() * 100.0).round() / 10.0).collect();
            let targets: Vec<u8> = values
                .iter()
                .map(|&x| u8::from(rng.random::<f64>() < 0.1 + 0.06 * x))
                .collect();
            let got = entropy_bin(&values, &targets, 2, 0.05).unwrap();
            assert_eq!(got.cuts.len(), 1);
            assert_eq!(got.cuts[0], oracle_best_cut(&values, &targets, 10), "seed {seed}");
        }
    }

    #[test]
    fn shares_respect_floor_and_max_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let targets: Vec<u8> = values.iter().map(|&x| u8::from(rng.random::<f64>() < x * 0.3)).collect();
        let out = entropy_bin(&values, &targets, 7, 0.05).unwrap();
        assert!(out.cuts.len() <= 6);
        let mut counts = vec![0usize; out.cuts.len() + 1];
        for x in &values {
            counts[out.cuts.partition_point(|c| c <= x)] += 1;
        }
        assert!(counts.iter().all(|&c| c >= 100), "{counts:?}");
        assert!(out.cuts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn equal_rates_merge_first() {
        // a and b share a 20% rate, c is at 60%
        let mut levels = Vec::new();
        let mut targets = Vec::new();
        for (l, n, bad) in [("a", 50, 10), ("b", 50, 10), ("c", 50, 30)] {
            for i in 0..n {
                levels.push(l);
                targets.push(u8::from(i < bad));
            }
        }
        let g = merge_categories(&levels, &targets, 2, 0.0).unwrap();
        assert_eq!(g.groups, vec![vec!["a".to_string(), "b".to_string()], vec!["c".to_string()]]);
        let one = merge_categories(&levels, &targets, 1, 0.0).unwrap();
        assert_eq!(one.groups.len(), 1);
    }

    #[test]
    fn small_level_joins_closest_neighbour() {
        // rates: a 10%, tiny 22% (1% share), b 25%, c 60%
        let mut levels = Vec::new();
        let mut targets = Vec::new();
        for (l, n, bad) in [("a", 400, 40), ("tiny", 9, 2), ("b", 400, 100), ("c", 100, 60)] {
            for i in 0..n {
                levels.push(l);
                targets.push(u8::from(i < bad));
            }
        }
        let g = merge_categories(&levels, &targets, 7, 0.05).unwrap();
        assert!(g.groups.contains(&vec!["b".to_string(), "tiny".to_string()]), "{:?}", g.groups);
        assert_eq!(g.groups.len(), 3);
    }

    #[test]
    fn single_level_is_degenerate() {
        let g = merge_categories(&["x"; 5], &[0, 1, 0, 0, 1], 7, 0.05).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.groups.len(), 1);
    }

    /// Ordered partitions of 10 rate-sorted levels into 3 contiguous groups,
    /// minimising the pooled within-group variance of level rates.
    #[test]
    fn greedy_merge_matches_ordered_partition_search() {
        let spec: [(&str, usize, usize); 10] = [
            ("l0", 100, 2),
            ("l1", 100, 3),
            ("l2", 100, 4),
            ("l3", 100, 20),
            ("l4", 100, 21),
            ("l5", 100, 23),
            ("l6", 100, 24),
            ("l7", 100, 50),
            ("l8", 100, 52),
            ("l9", 100, 55),
        ];
        let mut levels = Vec::new();
        let mut targets = Vec::new();
        for (l, n, bad) in spec {
            for i in 0..n {
                levels.push(l);
                targets.push(u8::from(i < bad));
            }
        }
        let got = merge_categories(&levels, &targets, 3, 0.0).unwrap();

        let rates: Vec<f64> = spec.iter().map(|&(_, n, b)| b as f64 / n as f64).collect();
        let sse = |lo: usize, hi: usize| {
            let m = rates[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            rates[lo..hi].iter().map(|r| (r - m).powi(2)).sum::<f64>()
        };
        let mut best = (f64::MAX, 0, 0);
        let mut count = 0;
        for a in 1..10 {
            for b in a + 1..10 {
                count += 1;
                let v = sse(0, a) + sse(a, b) + sse(b, 10);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        assert_eq!(count, 36);
        let expected: Vec<Vec<String>> = [0..best.1, best.1..best.2, best.2..10]
            .into_iter()
            .map(|r| r.map(|i| spec[i].0.to_string()).collect())
            .collect();
        assert_eq!(got.groups, expected);
    }

    fn frame(xs: Vec<Option<f64>>, ys: Vec<u8>) -> Dataset {
        let n = xs.len();
        Dataset::new(vec![
            Column::numeric("period", ColumnKind::Period, vec![Some(200501.0); n]),
            Column::numeric("target", ColumnKind::Target, ys.iter().map(|&y| Some(f64::from(y))).collect()),
            Column::numeric("x", ColumnKind::Numeric, xs),
        ])
        .unwrap()
    }

    fn noisy_frame(seed: u64, n: usize, missing_share: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.random();
            let miss = rng.random::<f64>() < missing_share;
            ys.push(u8::from(rng.random::<f64>() < if miss { 0.5 } else { 0.05 + 0.4 * x }));
            xs.push((!miss).then_some(x));
        }
        frame(xs, ys)
    }

    #[test]
    fn below_first_cut_is_first_attribute_and_missing_gets_own() {
        let ds = noisy_frame(1, 3000, 0.10);
        let map = fit_binning(&ds, &BinningParams::default()).unwrap();
        let v = &map.variables[0];
        assert!(matches!(v.missing, MissingRule::Own(a) if a == v.n_attributes() - 1));
        assert_eq!(v.numeric_attribute(Some(-1.0)), 0);
        assert_eq!(v.numeric_attribute(None), v.n_attributes() - 1);
    }

    #[test]
    fn rare_missing_merges_into_closest_rate() {
        let ds = noisy_frame(2, 3000, 0.01);
        let map = fit_binning(&ds, &BinningParams::default()).unwrap();
        let v = &map.variables[0];
        let MissingRule::Merged(a) = v.missing else {
            panic!("expected merged missing")
        };
        // missing rate is about 0.5, the riskiest bin is the closest
        assert_eq!(a, v.attributes.len() - 1);
    }

    #[test]
    fn applying_to_training_data_recounts_exactly() {
        let ds = noisy_frame(3, 4000, 0.08);
        let map = fit_binning(&ds, &BinningParams::default()).unwrap();
        let binned = apply_binning(&map, &ds).unwrap();
        let v = &map.variables[0];
        let mut counts = vec![AttributeStats::default(); v.n_attributes()];
        for (a, &y) in binned.attributes[0].iter().zip(&binned.targets) {
            bump(&mut counts[*a as usize], y);
        }
        assert_eq!(counts, v.attributes);
        let total: u64 = counts.iter().map(|s| s.n()).sum();
        assert_eq!(total as usize, ds.n_rows());
        assert!(counts.iter().all(|s| s.n() as f64 >= 0.05 * 4000.0));
    }

    #[test]
    fn refitting_on_attribute_ids_keeps_the_partition() {
        let ds = noisy_frame(4, 5000, 0.0);
        let map = fit_binning(&ds, &BinningParams::default()).unwrap();
        let binned = apply_binning(&map, &ds).unwrap();
        let ids: Vec<Option<f64>> = binned.attributes[0].iter().map(|&a| Some(f64::from(a))).collect();
        let again = fit_binning(&frame(ids.clone(), binned.targets.clone()), &BinningParams::default()).unwrap();
        let rebinned = apply_binning(&again, &frame(ids, binned.targets.clone())).unwrap();
        assert_eq!(rebinned.attributes[0], binned.attributes[0]);
    }

    #[test]
    fn unseen_level_goes_to_largest_group() {
        let mut levels = Vec::new();
        let mut ys = Vec::new();
        for (l, n, bad) in [("a", 300, 30), ("b", 100, 50)] {
            for i in 0..n {
                levels.push(Some(l.to_string()));
                ys.push(u8::from(i < bad));
            }
        }
        let n = levels.len();
        let ds = Dataset::new(vec![
            Column::numeric("period", ColumnKind::Period, vec![Some(200501.0); n]),
            Column::numeric("target", ColumnKind::Target, ys.iter().map(|&y| Some(f64::from(y))).collect()),
            Column::categorical("c", levels),
        ])
        .unwrap();
        let map = fit_binning(&ds, &BinningParams::default()).unwrap();
        let v = &map.variables[0];
        assert_eq!(v.level_attribute(Some("zzz")), (0, true));
        let text = map.to_text();
        assert_eq!(BinningMap::from_text(&text).unwrap(), map);
    }

    #[test]
    fn logits_are_finite_and_smoothed() {
        let pure = AttributeStats { n_good: 40, n_bad: 0 };
        assert!(pure.logit(0.5).is_finite());
        let s = AttributeStats { n_good: 90, n_bad: 10 };
        assert!((s.logit(0.5) - (10.5f64 / 90.5).ln()).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let ds = noisy_frame(6, 2000, 0.1);
        let map = fit_binning(&ds, &BinningParams::default()).unwrap();
        assert_eq!(BinningMap::from_text(&map.to_text()).unwrap(), map);
    }
}
