use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assess::{ModelRecord, Technique};
use crate::binning::{BinnedData, BinningMap, VariableBinning};
use crate::coding::{
    encode_reg, encode_view, AttributeView, DesignMatrix, Grouping, LogTransform, TrainMeans, VariableCoding,
};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::glm::{apply_adjustment, drop_aliased, fit, AdjustmentMethod, ModelFit, Response};
use crate::metrics::{ar_diff, collinearity_rows, gini_grouped, ModelCriteria};
use crate::subsets::{grp_union, Provenance, SubsetFamily};

use super::config::Settings;

/// One model the run will estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedModel {
    pub model_id: usize,
    pub technique: Technique,
    pub source: Provenance,
    pub size: usize,
    pub rank: usize,
    pub variables: Vec<String>,
}

/// REG family, LOG family, the GRP union, then the union once per
/// adjustment method; only techniques in `techniques` are planned.
pub fn plan_models(techniques: &[Technique], reg: &SubsetFamily, log: &SubsetFamily) -> Vec<PlannedModel> {
    let mut plan = Vec::new();
    let mut push = |technique: Technique, source: Provenance, s: &crate::subsets::RankedSubset| {
        plan.push(PlannedModel {
            model_id: 0,
            technique,
            source,
            size: s.size,
            rank: s.rank,
            variables: s.variables.clone(),
        });
    };
    if techniques.contains(&Technique::Reg) {
        reg.subsets.iter().for_each(|s| push(Technique::Reg, Provenance::Reg, s));
    }
    if techniques.contains(&Technique::Log) {
        log.subsets.iter().for_each(|s| push(Technique::Log, Provenance::Log, s));
    }
    let union = grp_union(reg, log);
    for t in techniques.iter().filter(|t| matches!(t, Technique::Grp | Technique::Adjusted(_))) {
        union.iter().for_each(|c| push(*t, c.source, &c.subset));
    }
    for (i, m) in plan.iter_mut().enumerate() {
        m.model_id = i + 1;
    }
    plan
}

/// Model counts per technique family.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ledger {
    pub reg: Option<usize>,
    pub log: Option<usize>,
    pub grp: Option<usize>,
    pub adjustments: Option<usize>,
    pub per_method: Vec<(String, usize)>,
}

impl Ledger {
    pub fn from_techniques(techniques: impl Iterator<Item = Technique>) -> Ledger {
        let mut l = Ledger::default();
        let mut per: HashMap<AdjustmentMethod, usize> = HashMap::new();
        for t in techniques {
            match t {
                Technique::Reg => *l.reg.get_or_insert(0) += 1,
                Technique::Log => *l.log.get_or_insert(0) += 1,
                Technique::Grp => *l.grp.get_or_insert(0) += 1,
                Technique::Adjusted(m) => {
                    *l.adjustments.get_or_insert(0) += 1;
                    *per.entry(m).or_insert(0) += 1;
                }
            }
        }
        l.per_method = AdjustmentMethod::ALL
            .iter()
            .filter_map(|m| per.get(m).map(|&n| (m.name(), n)))
            .collect();
        l
    }

    pub fn from_plan(plan: &[PlannedModel]) -> Ledger {
        Self::from_techniques(plan.iter().map(|m| m.technique))
    }

    pub fn total(&self) -> usize {
        [self.reg, self.log, self.grp, self.adjustments].iter().flatten().sum()
    }

    /// Family rows (`NAME COUNT`) for the families that ran; comments carry
    /// the total and the per-method split.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# models estimated per technique family\n");
        for (name, n) in [
            ("REG", self.reg),
            ("LOG", self.log),
            ("GRP", self.grp),
            ("ADJUSTMENTS", self.adjustments),
        ] {
            if let Some(n) = n {
                let _ = writeln!(s, "{name} {n}");
            }
        }
        let _ = writeln!(s, "# total {}", self.total());
        if !self.per_method.is_empty() {
            let parts: Vec<String> = self.per_method.iter().map(|(m, n)| format!("{m}={n}")).collect();
            let _ = writeln!(s, "# adjustments by method: {}", parts.join(" "));
        }
        s
    }

    /// Parses the family rows back.
    pub fn rows(text: &str) -> Vec<(String, usize)> {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| {
                let (k, v) = l.split_once(' ')?;
                Some((k.to_string(), v.trim().parse().ok()?))
            })
            .collect()
    }
}

/// A fitted model with its criteria and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub record: ModelRecord,
    pub source: Provenance,
    pub size: usize,
    pub rank: usize,
    pub n_params: usize,
    pub converged: bool,
}

const CRITERIA_HEADER: &str = "model_id,technique,source,size,rank,n_params,converged,ar_train,ar_valid,ar_diff,max_vif,max_pearson,max_cond_index,max_pvalue,variables";

pub fn criteria_csv(models: &[FittedModel]) -> String {
    let mut s = String::from(CRITERIA_HEADER);
    s.push('\n');
    for m in models {
        let c = &m.record.criteria;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
            m.record.model_id,
            m.record.technique,
            m.source.as_str(),
            m.size,
            m.rank,
            m.n_params,
            m.converged,
            c.ar_train,
            c.ar_valid,
            c.ar_diff,
            c.max_vif,
            c.max_pearson,
            c.max_cond_index,
            c.max_pvalue,
            m.record.variables.join(",")
        );
    }
    s
}

pub fn parse_criteria_csv(text: &str) -> Result<Vec<FittedModel>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CRITERIA_HEADER {
        return Err(Error::Schema("criteria file header not recognised".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |m: &str| Error::Parse {
            line,
            message: m.to_string(),
        };
        let f = |k: usize| -> Result<f64> { rec[k].parse().map_err(|_| bad("bad number")) };
        let u = |k: usize| -> Result<usize> { rec[k].parse().map_err(|_| bad("bad integer")) };
        let technique = Technique::parse(&rec[1]).ok_or_else(|| bad("unknown technique"))?;
        let source = match &rec[2] {
            "REG" => Provenance::Reg,
            "LOG" => Provenance::Log,
            _ => return Err(bad("unknown source")),
        };
        out.push(FittedModel {
            record: ModelRecord {
                technique,
                model_id: u(0)?,
                variables: rec[14].split(',').filter(|s| !s.is_empty()).map(str::to_string).collect(),
                criteria: ModelCriteria {
                    ar_train: f(7)?,
                    ar_valid: f(8)?,
                    ar_diff: f(9)?,
                    max_vif: f(10)?,
                    max_pearson: f(11)?,
                    max_cond_index: f(12)?,
                    max_pvalue: f(13)?,
                },
            },
            source,
            size: u(3)?,
            rank: u(4)?,
            n_params: u(5)?,
            converged: rec[6].parse().map_err(|_| bad("bad flag"))?,
        });
    }
    Ok(out)
}

/// Distinct attribute tuples of a variable set with outcome counts.
struct Patterns {
    ids: Vec<Vec<u16>>,
    response: Response,
}

fn patterns(binned: &BinnedData, columns: &[usize]) -> Result<Patterns> {
    let mut index: HashMap<Vec<u16>, usize> = HashMap::new();
    let mut keys: Vec<Vec<u16>> = Vec::new();
    let mut bads = Vec::new();
    let mut totals = Vec::new();
    for i in 0..binned.n_rows() {
        let key: Vec<u16> = columns.iter().map(|&c| binned.attributes[c][i]).collect();
        let k = *index.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            bads.push(0.0);
            totals.push(0.0);
            keys.len() - 1
        });
        bads[k] += f64::from(binned.targets[i]);
        totals[k] += 1.0;
    }
    let ids = (0..columns.len()).map(|v| keys.iter().map(|k| k[v]).collect()).collect();
    Ok(Patterns {
        ids,
        response: Response::grouped(bads, totals)?,
    })
}

/// Everything the fit stage needs, built once.
pub struct FitContext<'a> {
    pub settings: &'a Settings,
    pub map: &'a BinningMap,
    pub train: &'a Dataset,
    pub valid: &'a Dataset,
    pub binned_train: &'a BinnedData,
    pub binned_valid: &'a BinnedData,
    pub means: &'a TrainMeans,
}

struct Evaluated {
    fit: ModelFit,
    criteria: ModelCriteria,
    trail: Vec<String>,
}

fn evaluate(
    fit: ModelFit,
    train: &DesignMatrix,
    train_r: &Response,
    valid: &DesignMatrix,
    valid_r: &Response,
    trail: Vec<String>,
) -> Result<Evaluated> {
    let lt = fit.linear_predictor(train)?;
    let lv = fit.linear_predictor(valid)?;
    let ar_train = gini_grouped(&lt, train_r.bads(), train_r.totals())?;
    let ar_valid = gini_grouped(&lv, valid_r.bads(), valid_r.totals())?;
    let coll = collinearity_rows(train.values(), train.n_cols(), Some(train_r.totals()))?;
    let criteria = ModelCriteria {
        ar_train,
        ar_valid,
        ar_diff: ar_diff(ar_train, ar_valid).unwrap_or(f64::NAN),
        max_vif: coll.max_vif,
        max_pearson: coll.max_pearson,
        max_cond_index: coll.max_cond_index,
        max_pvalue: fit.max_pvalue(),
    };
    Ok(Evaluated { fit, criteria, trail })
}

/// The columns of `full` carrying the labels of `fitted`, in that order.
fn matching_columns(fitted: &DesignMatrix, full: &DesignMatrix) -> Result<DesignMatrix> {
    let keep = fitted.labels()[1..]
        .iter()
        .map(|l| {
            full.labels()
                .iter()
                .position(|f| f == l)
                .ok_or_else(|| Error::Fit(format!("validation design lacks column {l}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(full.select_columns(&keep))
}

/// Fits after dropping aliased columns, dropping the same columns from the
/// validation design.
fn fit_plain(train: &DesignMatrix, train_r: &Response, valid: &DesignMatrix, valid_r: &Response) -> Result<Evaluated> {
    let (t, aliased) = drop_aliased(train, train_r);
    let v = matching_columns(&t, valid)?;
    let trail = aliased.iter().map(|&j| format!("aliased {}", train.labels()[j])).collect();
    let f = fit(&t, train_r)?;
    evaluate(f, &t, train_r, &v, valid_r, trail)
}

impl FitContext<'_> {
    fn column_indices(&self, variables: &[String]) -> Result<(Vec<usize>, Vec<usize>, Vec<&VariableBinning>)> {
        let mut t = Vec::new();
        let mut v = Vec::new();
        let mut vars = Vec::new();
        for name in variables {
            t.push(
                self.binned_train
                    .index_of(name)
                    .ok_or_else(|| Error::Fit(format!("{name} not binned")))?,
            );
            v.push(
                self.binned_valid
                    .index_of(name)
                    .ok_or_else(|| Error::Fit(format!("{name} not binned")))?,
            );
            vars.push(
                self.map
                    .variable(name)
                    .ok_or_else(|| Error::Fit(format!("{name} absent from binning map")))?,
            );
        }
        Ok((t, v, vars))
    }

    fn fit_reg(&self, variables: &[String]) -> Result<Evaluated> {
        let names: Vec<&str> = variables.iter().map(String::as_str).collect();
        let t = encode_reg(self.train, &names, self.means)?;
        let v = encode_reg(self.valid, &names, self.means)?;
        let tr = Response::binary(&self.binned_train.targets);
        let vr = Response::binary(&self.binned_valid.targets);
        fit_plain(&t, &tr, &v, &vr)
    }

    fn log_codings(&self, n: usize) -> Vec<VariableCoding> {
        let transform: LogTransform = self.settings.log_transform;
        vec![
            VariableCoding::Log {
                transform,
                smoothing: self.map.params.smoothing,
            };
            n
        ]
    }

    fn fit_log(&self, variables: &[String]) -> Result<Evaluated> {
        let (ti, vi, vars) = self.column_indices(variables)?;
        let pt = patterns(self.binned_train, &ti)?;
        let pv = patterns(self.binned_valid, &vi)?;
        let codings = self.log_codings(vars.len());
        let t = encode_view(view(&vars, &pt).view(), &codings)?;
        let v = encode_view(view(&vars, &pv).view(), &codings)?;
        fit_plain(&t, &pt.response, &v, &pv.response)
    }

    /// The GRP model and every requested adjustment of one variable set, in
    /// technique order.
    fn fit_grp_family(&self, variables: &[String], techniques: &[Technique]) -> Result<Vec<(Technique, Evaluated)>> {
        let (ti, vi, vars) = self.column_indices(variables)?;
        let pt = patterns(self.binned_train, &ti)?;
        let pv = patterns(self.binned_valid, &vi)?;
        let tview = view(&vars, &pt);
        let vview = view(&vars, &pv);
        let mut out = Vec::new();
        for &t in techniques {
            match t {
                Technique::Grp => {
                    let codings: Vec<VariableCoding> = vars
                        .iter()
                        .map(|v| VariableCoding::Indicator {
                            kind: self.settings.grp_coding,
                            grouping: Grouping::full(v.n_attributes()),
                        })
                        .collect();
                    let td = encode_view(tview.view(), &codings)?;
                    let vd = encode_view(vview.view(), &codings)?;
                    out.push((t, fit_plain(&td, &pt.response, &vd, &pv.response)?));
                }
                Technique::Adjusted(method) => {
                    let adj = apply_adjustment(method, tview.view(), &pt.response, self.settings.thresholds)?;
                    let vd = matching_columns(&adj.design, &encode_view(vview.view(), &adj.codings)?)?;
                    let mut trail: Vec<String> = adj.removed.iter().map(|l| format!("removed {l}")).collect();
                    trail.extend(adj.dropped_variables.iter().map(|v| format!("dropped {v}")));
                    out.push((t, evaluate(adj.fit, &adj.design, &pt.response, &vd, &pv.response, trail)?));
                }
                Technique::Reg | Technique::Log => {}
            }
        }
        Ok(out)
    }
}

struct OwnedView<'a> {
    vars: Vec<&'a VariableBinning>,
    ids: Vec<&'a [u16]>,
    n_rows: usize,
}

impl OwnedView<'_> {
    fn view(&self) -> AttributeView<'_> {
        AttributeView {
            variables: &self.vars,
            ids: &self.ids,
            n_rows: self.n_rows,
        }
    }
}

fn view<'a>(vars: &[&'a VariableBinning], p: &'a Patterns) -> OwnedView<'a> {
    OwnedView {
        vars: vars.to_vec(),
        ids: p.ids.iter().map(Vec::as_slice).collect(),
        n_rows: p.response.len(),
    }
}

/// Fits every planned model. Output follows the plan order; the text
/// blocks hold coefficients and removal trails.
pub fn fit_plan(ctx: &FitContext<'_>, plan: &[PlannedModel]) -> Result<(Vec<FittedModel>, String)> {
    let grp_techniques: Vec<Technique> = ctx
        .settings
        .techniques
        .iter()
        .copied()
        .filter(|t| matches!(t, Technique::Grp | Technique::Adjusted(_)))
        .collect();

    // one job per REG model, per LOG model, and per GRP-union variable set
    enum Job<'p> {
        Single(&'p PlannedModel),
        Union(Vec<&'p PlannedModel>),
    }
    let mut jobs: Vec<Job> = Vec::new();
    let mut union_jobs: HashMap<(Provenance, usize, usize), usize> = HashMap::new();
    for m in plan {
        match m.technique {
            Technique::Reg | Technique::Log => jobs.push(Job::Single(m)),
            _ => {
                let key = (m.source, m.size, m.rank);
                match union_jobs.get(&key) {
                    Some(&j) => {
                        if let Job::Union(v) = &mut jobs[j] {
                            v.push(m);
                        }
                    }
                    None => {
                        union_jobs.insert(key, jobs.len());
                        jobs.push(Job::Union(vec![m]));
                    }
                }
            }
        }
    }

    let results: Vec<Result<Vec<(&PlannedModel, Evaluated)>>> = jobs
        .par_iter()
        .map(|job| match job {
            Job::Single(m) => {
                let e = if m.technique == Technique::Reg {
                    ctx.fit_reg(&m.variables)?
                } else {
                    ctx.fit_log(&m.variables)?
                };
                Ok(vec![(*m, e)])
            }
            Job::Union(models) => {
                let fits = ctx.fit_grp_family(&models[0].variables, &grp_techniques)?;
                let mut out = Vec::new();
                for (t, e) in fits {
                    if let Some(m) = models.iter().find(|m| m.technique == t) {
                        out.push((*m, e));
                    }
                }
                Ok(out)
            }
        })
        .collect();

    let mut all: Vec<(&PlannedModel, Evaluated)> = Vec::with_capacity(plan.len());
    for r in results {
        all.extend(r?);
    }
    all.sort_by_key(|(m, _)| m.model_id);
    let mut text = String::new();
    let mut fitted = Vec::with_capacity(all.len());
    for (m, e) in all {
        let _ = writeln!(
            text,
            "# model {} {} source={} size={} rank={} variables={}",
            m.model_id,
            m.technique,
            m.source.as_str(),
            m.size,
            m.rank,
            m.variables.join(",")
        );
        for line in &e.trail {
            let _ = writeln!(text, "# {line}");
        }
        text.push_str(&e.fit.to_text(&format!("{}-{}", m.technique, m.model_id)));
        fitted.push(FittedModel {
            record: ModelRecord {
                technique: m.technique,
                model_id: m.model_id,
                variables: m.variables.clone(),
                criteria: e.criteria,
            },
            source: m.source,
            size: m.size,
            rank: m.rank,
            n_params: e.fit.n_params(),
            converged: e.fit.converged,
        });
    }
    Ok((fitted, text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subsets::RankedSubset;

    fn family(sizes: &[usize], k: usize) -> SubsetFamily {
        let mut subsets = Vec::new();
        for &s in sizes {
            for r in 1..=k {
                subsets.push(RankedSubset {
                    size: s,
                    rank: r,
                    criterion: 1.0,
                    variables: (0..s).map(|i| format!("v{i}")).collect(),
                });
            }
        }
        SubsetFamily {
            subsets,
            skipped_sizes: vec![],
        }
    }

    #[test]
    fn full_shape_ledger() {
        let f = family(&[6, 7, 8, 9, 10, 11, 12], 100);
        let plan = plan_models(&Technique::all(), &f, &f);
        let l = Ledger::from_plan(&plan);
        assert_eq!(
            (l.reg, l.log, l.grp, l.adjustments),
            (Some(700), Some(700), Some(1400), Some(16800))
        );
        assert_eq!(l.total(), 19600);
        assert!(l.per_method.iter().all(|(_, n)| *n == 1400));
        assert_eq!(Ledger::rows(&l.to_text()).len(), 4);
    }

    #[test]
    fn single_technique_ledger_has_one_row() {
        let f = family(&[3], 10);
        let plan = plan_models(&[Technique::Log], &f, &f);
        assert_eq!(Ledger::rows(&Ledger::from_plan(&plan).to_text()), vec![("LOG".to_string(), 10)]);
    }
}
