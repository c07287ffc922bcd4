//! Variable pre-selection on one-dimensional criteria and best-subset
//! search over the survivors.
//!
//! Subsets are ranked by the score chi-square of the logistic model at the
//! null (`n·R²` of the least-squares fit of the target on the columns), which
//! never decreases when a variable is added. The search is branch-and-bound
//! with the criterion of the largest reachable superset as the bound.

use std::fmt::Write as _;

use crate::binning::{BinnedData, BinningMap};
use crate::error::{Error, Result};
use crate::metrics::gini_grouped;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreselectParams {
    pub min_gini: f64,
    pub max_instability: f64,
}

impl Default for PreselectParams {
    fn default() -> Self {
        PreselectParams {
            min_gini: 0.05,
            max_instability: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateVariable {
    pub name: String,
    pub gini_train: f64,
    pub gini_valid: f64,
    /// `(gini_train − gini_valid) / gini_train`.
    pub instability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    /// Survivors, sorted by name.
    pub members: Vec<CandidateVariable>,
    pub rejected: Vec<CandidateVariable>,
}

impl CandidatePool {
    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.name.clone()).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("variable,gini_train,gini_valid,instability,kept\n");
        let mut all: Vec<(&CandidateVariable, bool)> = self
            .members
            .iter()
            .map(|m| (m, true))
            .chain(self.rejected.iter().map(|m| (m, false)))
            .collect();
        all.sort_by(|a, b| a.0.name.cmp(&b.0.name));
        for (m, kept) in all {
            let _ = writeln!(s, "{},{},{},{},{}", m.name, m.gini_train, m.gini_valid, m.instability, kept);
        }
        s
    }
}

/// Gini of a binned variable scored by its training attribute logits.
fn single_gini(logits: &[f64], ids: &[u16], targets: &[u8]) -> f64 {
    let k = logits.len();
    let mut bads = vec![0.0; k];
    let mut totals = vec![0.0; k];
    for (&a, &y) in ids.iter().zip(targets) {
        bads[usize::from(a)] += f64::from(y);
        totals[usize::from(a)] += 1.0;
    }
    gini_grouped(logits, &bads, &totals).unwrap_or(0.0)
}

/// Keeps variables whose single-factor training Gini reaches `min_gini` and
/// whose relative Gini drop on validation is at most `max_instability`.
pub fn preselect(
    map: &BinningMap,
    train: &BinnedData,
    valid: &BinnedData,
    params: &PreselectParams,
) -> Result<CandidatePool> {
    let mut members = Vec::new();
    let mut rejected = Vec::new();
    for (v, name) in train.names.iter().enumerate() {
        let var = map
            .variable(name)
            .ok_or_else(|| Error::Subsets(format!("{name} absent from binning map")))?;
        let vi = valid
            .index_of(name)
            .ok_or_else(|| Error::Subsets(format!("{name} absent from validation data")))?;
        let logits = var.logits(map.params.smoothing);
        let gini_train = single_gini(&logits, &train.attributes[v], &train.targets);
        let gini_valid = single_gini(&logits, &valid.attributes[vi], &valid.targets);
        let instability = if gini_train > 0.0 {
            (gini_train - gini_valid) / gini_train
        } else {
            f64::INFINITY
        };
        let c = CandidateVariable {
            name: name.clone(),
            gini_train,
            gini_valid,
            instability,
        };
        if gini_train >= params.min_gini && instability <= params.max_instability {
            members.push(c);
        } else {
            rejected.push(c);
        }
    }
    if members.is_empty() {
        return Err(Error::EmptyPool {
            min_gini: params.min_gini,
            max_instability: params.max_instability,
        });
    }
    members.sort_by(|a, b| a.name.cmp(&b.name));
    rejected.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(CandidatePool { members, rejected })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetParams {
    pub sizes: Vec<usize>,
    pub top_k: usize,
    /// Sizes with at most this many combinations are enumerated.
    pub exhaustive_limit: u64,
}

impl Default for SubsetParams {
    fn default() -> Self {
        SubsetParams {
            sizes: (6..=12).collect(),
            top_k: 100,
            exhaustive_limit: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSubset {
    pub size: usize,
    /// 1-based rank within the size.
    pub rank: usize,
    pub criterion: f64,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubsetFamily {
    pub subsets: Vec<RankedSubset>,
    /// Requested sizes larger than the pool.
    pub skipped_sizes: Vec<usize>,
}

impl SubsetFamily {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn of_size(&self, size: usize) -> impl Iterator<Item = &RankedSubset> {
        self.subsets.iter().filter(move |s| s.size == size)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("size,rank,criterion,variables\n");
        for r in &self.subsets {
            let _ = writeln!(s, "{},{},{},\"{}\"", r.size, r.rank, r.criterion, r.variables.join(","));
        }
        s
    }

    pub fn from_csv_str(text: &str) -> Result<SubsetFamily> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut subsets = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |m: &str| Error::Parse {
                line: i + 2,
                message: m.to_string(),
            };
            if rec.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let variables: Vec<String> = rec[3].split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
            subsets.push(RankedSubset {
                size: rec[0].parse().map_err(|_| bad("bad size"))?,
                rank: rec[1].parse().map_err(|_| bad("bad rank"))?,
                criterion: rec[2].parse().map_err(|_| bad("bad criterion"))?,
                variables,
            });
        }
        Ok(SubsetFamily {
            subsets,
            skipped_sizes: Vec::new(),
        })
    }
}

/// Centred cross-products of the candidate columns with each other and with
/// the target.
pub struct ScoreCriterion {
    n: f64,
    syy: f64,
    gram: Vec<f64>,
    xy: Vec<f64>,
    p: usize,
}

impl ScoreCriterion {
    pub fn new(columns: &[Vec<f64>], targets: &[u8]) -> Result<ScoreCriterion> {
        let p = columns.len();
        let n = targets.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Subsets("column lengths differ from targets".into()));
        }
        if n == 0 {
            return Err(Error::Subsets("no rows".into()));
        }
        let nf = n as f64;
        let ybar = targets.iter().map(|&y| f64::from(y)).sum::<f64>() / nf;
        let syy = nf * ybar * (1.0 - ybar);
        if syy <= 0.0 {
            return Err(Error::Subsets("target has a single class".into()));
        }
        let centred: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| {
                let m = c.iter().sum::<f64>() / nf;
                c.iter().map(|v| v - m).collect()
            })
            .collect();
        let mut gram = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let v: f64 = centred[a].iter().zip(&centred[b]).map(|(x, y)| x * y).sum();
                gram[a * p + b] = v;
                gram[b * p + a] = v;
            }
        }
        let xy = centred
            .iter()
            .map(|c| c.iter().zip(targets).map(|(x, &y)| x * (f64::from(y) - ybar)).sum())
            .collect();
        Ok(ScoreCriterion {
            n: nf,
            syy,
            gram,
            xy,
            p,
        })
    }

    pub fn n_variables(&self) -> usize {
        self.p
    }

    /// `n·R²` of the subset; columns dependent on earlier ones add nothing.
    pub fn evaluate(&self, subset: &[usize]) -> f64 {
        let m = subset.len();
        let mut l = vec![0.0; m * m];
        let mut z = vec![0.0; m];
        let mut kept: Vec<usize> = Vec::with_capacity(m);
        let mut ss = 0.0;
        for (j, &vj) in subset.iter().enumerate() {
            let diag = self.gram[vj * self.p + vj];
            let mut d = diag;
            for &k in &kept {
                d -= l[j * m + k] * l[j * m + k];
            }
            if diag <= 0.0 || d <= 1e-12 * diag {
                continue;
            }
            let piv = d.sqrt();
            l[j * m + j] = piv;
            for (i, &vi) in subset.iter().enumerate().skip(j + 1) {
                let mut s = self.gram[vi * self.p + vj];
                for &k in &kept {
                    s -= l[i * m + k] * l[j * m + k];
                }
                l[i * m + j] = s / piv;
            }
            let mut zj = self.xy[vj];
            for &k in &kept {
                zj -= l[j * m + k] * z[k];
            }
            z[j] = zj / piv;
            ss += z[j] * z[j];
            kept.push(j);
        }
        self.n * (ss / self.syy).min(1.0)
    }
}

/// Top `k` per size, best first; ties go to the lexicographically smaller
/// index list.
struct TopK {
    k: usize,
    items: Vec<(f64, Vec<usize>)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK { k, items: Vec::new() }
    }

    fn better(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    fn threshold(&self) -> Option<f64> {
        (self.items.len() >= self.k).then(|| self.items[self.k - 1].0)
    }

    fn offer(&mut self, value: f64, subset: &[usize]) {
        if self.k == 0 {
            return;
        }
        let cand = (value, subset.to_vec());
        if self.items.len() >= self.k && !Self::better(&cand, &self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|x| Self::better(x, &cand));
        self.items.insert(pos, cand);
        self.items.truncate(self.k);
    }
}

fn choose(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
        if r > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    r as u64
}

fn exhaustive_size(crit: &ScoreCriterion, size: usize, top: &mut TopK) {
    let p = crit.n_variables();
    if size == 0 || size > p {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        top.offer(crit.evaluate(&idx), &idx);
        let mut i = size;
        while i > 0 && idx[i - 1] == p - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

struct Search<'a> {
    crit: &'a ScoreCriterion,
    order: Vec<usize>,
    sizes: Vec<usize>,
    tops: Vec<TopK>,
    max_size: usize,
}

impl Search<'_> {
    fn slot(&self, size: usize) -> Option<usize> {
        self.sizes.iter().position(|&s| s == size)
    }

    /// True when no size reachable from a node with `n_in` included and
    /// `n_free` undecided variables can still enter its top list.
    fn prunable(&self, bound: f64, n_in: usize, n_free: usize) -> bool {
        let hi = (n_in + n_free).min(self.max_size);
        (n_in..=hi).all(|s| match self.slot(s) {
            None => true,
            Some(k) => self.tops[k]
                .threshold()
                .is_some_and(|t| bound < t - 1e-9 * (1.0 + t.abs())),
        })
    }

    /// `included` is sorted; `pos` indexes into `order`; `bound` is the
    /// criterion of `included ∪ order[pos..]`.
    fn descend(&mut self, included: &mut Vec<usize>, pos: usize, bound: f64) {
        let free = self.order.len() - pos;
        if free == 0 || included.len() >= self.max_size {
            return;
        }
        if self.prunable(bound, included.len(), free) {
            return;
        }
        let v = self.order[pos];
        // include v: same reachable superset, same bound
        let at = included.partition_point(|&x| x < v);
        included.insert(at, v);
        if let Some(k) = self.slot(included.len()) {
            let value = self.crit.evaluate(included);
            debug_assert!(value <= bound + 1e-8 * (1.0 + bound.abs()));
            self.tops[k].offer(value, included);
        }
        self.descend(included, pos + 1, bound);
        included.remove(at);
        // exclude v
        if free > 1 {
            let mut rest: Vec<usize> = included.iter().copied().chain(self.order[pos + 1..].iter().copied()).collect();
            rest.sort_unstable();
            let child_bound = self.crit.evaluate(&rest);
            debug_assert!(child_bound <= bound + 1e-8 * (1.0 + bound.abs()));
            self.descend(included, pos + 1, child_bound);
        }
    }
}

/// Top `top_k` subsets per size. `names` label the columns and fix the
/// tie-break order; they must be sorted.
pub fn best_subsets(
    names: &[String],
    columns: &[Vec<f64>],
    targets: &[u8],
    params: &SubsetParams,
) -> Result<SubsetFamily> {
    if names.len() != columns.len() {
        return Err(Error::Subsets("one name per column required".into()));
    }
    if names.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Subsets("variable names must be sorted and unique".into()));
    }
    let crit = ScoreCriterion::new(columns, targets)?;
    let p = names.len();
    let mut sizes: Vec<usize> = params.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let skipped_sizes: Vec<usize> = sizes.iter().copied().filter(|&s| s > p || s == 0).collect();
    sizes.retain(|&s| s >= 1 && s <= p);

    let mut results: Vec<(usize, TopK)> = Vec::new();
    let mut searched = Vec::new();
    for &s in &sizes {
        if choose(p, s) <= params.exhaustive_limit {
            let mut top = TopK::new(params.top_k);
            exhaustive_size(&crit, s, &mut top);
            results.push((s, top));
        } else {
            searched.push(s);
        }
    }
    if !searched.is_empty() {
        results.extend(branch_and_bound(&crit, &searched, params.top_k));
    }
    results.sort_by_key(|(s, _)| *s);
    let mut subsets = Vec::new();
    for (size, top) in results {
        for (rank, (criterion, idx)) in top.items.into_iter().enumerate() {
            subsets.push(RankedSubset {
                size,
                rank: rank + 1,
                criterion,
                variables: idx.iter().map(|&i| names[i].clone()).collect(),
            });
        }
    }
    Ok(SubsetFamily { subsets, skipped_sizes })
}

fn branch_and_bound(crit: &ScoreCriterion, sizes: &[usize], top_k: usize) -> Vec<(usize, TopK)> {
    let p = crit.n_variables();
    let all: Vec<usize> = (0..p).collect();
    let full = crit.evaluate(&all);
    // strongest variables first: the loss when each is dropped from the full set
    let mut order: Vec<(f64, usize)> = (0..p)
        .map(|v| {
            let rest: Vec<usize> = (0..p).filter(|&u| u != v).collect();
            (full - crit.evaluate(&rest), v)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut search = Search {
        crit,
        order: order.into_iter().map(|(_, v)| v).collect(),
        sizes: sizes.to_vec(),
        tops: sizes.iter().map(|_| TopK::new(top_k)).collect(),
        max_size: sizes.iter().copied().max().unwrap_or(0),
    };
    let mut included = Vec::new();
    search.descend(&mut included, 0, full);
    sizes.iter().copied().zip(search.tops).collect()
}

/// Exhaustive enumeration for every size; the reference for the search.
pub fn exhaustive_subsets(
    names: &[String],
    columns: &[Vec<f64>],
    targets: &[u8],
    sizes: &[usize],
    top_k: usize,
) -> Result<SubsetFamily> {
    best_subsets(
        names,
        columns,
        targets,
        &SubsetParams {
            sizes: sizes.to_vec(),
            top_k,
            exhaustive_limit: u64::MAX,
        },
    )
}

/// Branch-and-bound for every size, never enumerating.
pub fn searched_subsets(
    names: &[String],
    columns: &[Vec<f64>],
    targets: &[u8],
    sizes: &[usize],
    top_k: usize,
) -> Result<SubsetFamily> {
    best_subsets(
        names,
        columns,
        targets,
        &SubsetParams {
            sizes: sizes.to_vec(),
            top_k,
            exhaustive_limit: 0,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Reg,
    Log,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Reg => "REG",
            Provenance::Log => "LOG",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrpCandidate {
    pub source: Provenance,
    pub subset: RankedSubset,
}

/// Every REG subset followed by every LOG subset; duplicates are kept.
pub fn grp_union(reg: &SubsetFamily, log: &SubsetFamily) -> Vec<GrpCandidate> {
    reg.subsets
        .iter()
        .map(|s| GrpCandidate {
            source: Provenance::Reg,
            subset: s.clone(),
        })
        .chain(log.subsets.iter().map(|s| GrpCandidate {
            source: Provenance::Log,
            subset: s.clone(),
        }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, n: usize, p: usize) -> (Vec<String>, Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let columns: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                let w = rng.random::<f64>();
                (0..n).map(|i| w * latent[i] + rng.random::<f64>() * (j as f64 % 3.0 + 0.5)).collect()
            })
            .collect();
        let y = (0..n).map(|i| u8::from(rng.random::<f64>() < 0.1 + 0.5 * latent[i])).collect();
        let names = (0..p).map(|j| format!("v{j:02}")).collect();
        (names, columns, y)
    }

    /// `n·R²` from a direct least-squares solve with intercept.
    fn oracle(columns: &[Vec<f64>], y: &[u8], subset: &[usize]) -> f64 {
        let n = y.len();
        let x = DMatrix::from_fn(n, subset.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[subset[j - 1]][i] });
        let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));
        let beta = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &yv));
        let fitted = &x * beta;
        let ybar = yv.mean();
        let sst: f64 = yv.iter().map(|v| (v - ybar).powi(2)).sum();
        let sse: f64 = yv.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        n as f64 * (1.0 - sse / sst)
    }

    #[test]
    fn criterion_matches_least_squares_oracle() {
        let (_, cols, y) = problem(1, 400, 5);
        let crit = ScoreCriterion::new(&cols, &y).unwrap();
        for subset in [vec![0], vec![1, 3], vec![0, 2, 4], vec![0, 1, 2, 3, 4]] {
            let a = crit.evaluate(&subset);
            let b = oracle(&cols, &y, &subset);
            assert!((a - b).abs() < 1e-8 * b.max(1.0), "{subset:?}: {a} vs {b}");
        }
    }

    #[test]
    fn branch_and_bound_equals_enumeration_p8() {
        let (names, cols, y) = problem(2, 300, 8);
        let sizes: Vec<usize> = (1..=8).collect();
        let a = searched_subsets(&names, &cols, &y, &sizes, 1000).unwrap();
        let b = exhaustive_subsets(&names, &cols, &y, &sizes, 1000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 255);
    }

    #[test]
    fn seven_sizes_of_one_hundred() {
        let (names, cols, y) = problem(3, 200, 16);
        let fam = best_subsets(&names, &cols, &y, &SubsetParams::default()).unwrap();
        assert_eq!(fam.len(), 700);
        for s in 6..=12 {
            let ranked: Vec<&RankedSubset> = fam.of_size(s).collect();
            assert_eq!(ranked.len(), 100);
            assert!(ranked.windows(2).all(|w| w[0].criterion >= w[1].criterion));
        }
    }

    #[test]
    fn pool_of_exactly_size_gives_full_subset() {
        let (names, cols, y) = problem(4, 100, 4);
        let fam = best_subsets(
            &names,
            &cols,
            &y,
            &SubsetParams {
                sizes: vec![4, 5],
                top_k: 10,
                exhaustive_limit: 0,
            },
        )
        .unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam.subsets[0].variables, names);
        assert_eq!(fam.skipped_sizes, vec![5]);
    }

    #[test]
    fn union_keeps_duplicates_and_provenance() {
        let (names, cols, y) = problem(5, 100, 6);
        let fam = best_subsets(
            &names,
            &cols,
            &y,
            &SubsetParams {
                sizes: vec![2, 3],
                top_k: 5,
                exhaustive_limit: 0,
            },
        )
        .unwrap();
        let u = grp_union(&fam, &fam);
        assert_eq!(u.len(), 20);
        assert_eq!(u.iter().filter(|c| c.source == Provenance::Reg).count(), 10);
        let empty = SubsetFamily {
            subsets: vec![],
            skipped_sizes: vec![],
        };
        assert_eq!(grp_union(&fam, &empty).len(), 10);
    }

    #[test]
    fn csv_round_trip() {
        let (names, cols, y) = problem(6, 100, 6);
        let fam = exhaustive_subsets(&names, &cols, &y, &[2, 3], 4).unwrap();
        assert_eq!(SubsetFamily::from_csv_str(&fam.to_csv_string()).unwrap(), fam);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn search_is_exact(seed in 0u64..10_000, p in 3usize..=12, k in 1usize..20) {
            let (names, cols, y) = problem(seed, 150, p);
            let sizes: Vec<usize> = (1..=p).collect();
            let a = searched_subsets(&names, &cols, &y, &sizes, k).unwrap();
            let b = exhaustive_subsets(&names, &cols, &y, &sizes, k).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn criterion_monotone_in_nested_subsets(seed in 0u64..10_000) {
            let (_, cols, y) = problem(seed, 120, 6);
            let crit = ScoreCriterion::new(&cols, &y).unwrap();
            let mut subset = Vec::new();
            let mut last = 0.0;
            for v in [3, 0, 5, 1, 4, 2] {
                subset.push(v);
                subset.sort_unstable();
                let now = crit.evaluate(&subset);
                prop_assert!(now >= last - 1e-9);
                last = now;
            }
        }
    }
}
