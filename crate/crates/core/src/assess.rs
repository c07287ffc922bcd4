//! Multi-criteria comparison of model families: per-technique pools,
//! min-max normalised distance to the ideal model, distribution summaries
//! and the LOG-versus-NBM head-to-head.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::glm::AdjustmentMethod;
use crate::metrics::ModelCriteria;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Technique {
    Reg,
    Log,
    Grp,
    Adjusted(AdjustmentMethod),
}

impl Technique {
    /// REG, LOG, GRP and the twelve adjustments, in report order.
    pub fn all() -> Vec<Technique> {
        let mut v = vec![Technique::Reg, Technique::Log, Technique::Grp];
        v.extend(AdjustmentMethod::ALL.into_iter().map(Technique::Adjusted));
        v
    }

    pub fn label(&self) -> String {
        match self {
            Technique::Reg => "REG".into(),
            Technique::Log => "LOG".into(),
            Technique::Grp => "GRP".into(),
            Technique::Adjusted(m) => m.name(),
        }
    }

    pub fn parse(s: &str) -> Option<Technique> {
        match s.to_ascii_uppercase().as_str() {
            "REG" => Some(Technique::Reg),
            "LOG" => Some(Technique::Log),
            "GRP" => Some(Technique::Grp),
            other => AdjustmentMethod::parse(other).map(Technique::Adjusted),
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub technique: Technique,
    pub model_id: usize,
    pub variables: Vec<String>,
    pub criteria: ModelCriteria,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    pub name: String,
    pub prediction: f64,
    pub stability: f64,
    pub collinearity: f64,
    pub significance: f64,
}

impl WeightProfile {
    pub fn new(name: &str, prediction: f64, stability: f64, collinearity: f64, significance: f64) -> Result<Self> {
        let w = [prediction, stability, collinearity, significance];
        if w.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Assess(format!("{name}: weights must be non-negative")));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Assess(format!("{name}: weights must sum to 1")));
        }
        Ok(WeightProfile {
            name: name.into(),
            prediction,
            stability,
            collinearity,
            significance,
        })
    }

    pub fn equal() -> Self {
        Self::new("EQUAL", 0.40, 0.40, 0.10, 0.10).expect("valid preset")
    }

    pub fn stability_heavy() -> Self {
        Self::new("STABILITY_HEAVY", 0.25, 0.55, 0.10, 0.10).expect("valid preset")
    }

    pub fn prediction_heavy() -> Self {
        Self::new("PREDICTION_HEAVY", 0.55, 0.25, 0.10, 0.10).expect("valid preset")
    }

    pub fn presets() -> [WeightProfile; 3] {
        [Self::equal(), Self::stability_heavy(), Self::prediction_heavy()]
    }

    fn weights(&self) -> [f64; 4] {
        [self.prediction, self.stability, self.collinearity, self.significance]
    }
}

fn top_order(a: &ModelRecord, b: &ModelRecord) -> std::cmp::Ordering {
    b.criteria
        .ar_valid
        .total_cmp(&a.criteria.ar_valid)
        .then(a.criteria.ar_diff.abs().total_cmp(&b.criteria.ar_diff.abs()))
        .then(a.model_id.cmp(&b.model_id))
}

/// The `k` records with the highest validation AR; ties by smaller
/// `|ar_diff|`, then model id.
pub fn top_pool(records: &[ModelRecord], k: usize) -> Vec<ModelRecord> {
    let mut v = records.to_vec();
    v.sort_by(top_order);
    v.truncate(k);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            min = min.min(v);
            max = max.max(v);
        }
        Range { min, max }
    }

    fn degenerate(&self) -> bool {
        !(self.max > self.min)
    }

    /// Position in `[0, 1]`; non-finite values sit at the bad end.
    fn scale(&self, v: f64) -> f64 {
        if self.degenerate() {
            0.0
        } else if !v.is_finite() {
            1.0
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

/// Min-max ranges of the raw criteria over a comparison pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    ar_valid: Range,
    abs_diff: Range,
    vif: Range,
    cond: Range,
    pearson: Range,
    pvalue: Range,
}

impl Normalizer {
    pub fn fit(pool: &[ModelRecord]) -> Normalizer {
        let c = |f: fn(&ModelCriteria) -> f64| Range::of(pool.iter().map(|r| f(&r.criteria)));
        Normalizer {
            ar_valid: c(|m| m.ar_valid),
            abs_diff: c(|m| m.ar_diff.abs()),
            vif: c(|m| m.max_vif),
            cond: c(|m| m.max_cond_index),
            pearson: c(|m| m.max_pearson),
            pvalue: c(|m| m.max_pvalue),
        }
    }

    /// Criteria whose range over the pool is empty (they contribute 0).
    pub fn degenerate_criteria(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, r) in [
            ("ar_valid", self.ar_valid),
            ("abs_ar_diff", self.abs_diff),
            ("max_vif", self.vif),
            ("max_cond_index", self.cond),
            ("max_pearson", self.pearson),
            ("max_pvalue", self.pvalue),
        ] {
            if r.degenerate() {
                out.push(name);
            }
        }
        out
    }

    /// Prediction, stability, collinearity and significance coordinates,
    /// each in `[0, 1]` with 0 ideal.
    pub fn coordinates(&self, c: &ModelCriteria) -> [f64; 4] {
        let pred = if self.ar_valid.degenerate() {
            0.0
        } else {
            1.0 - self.ar_valid.scale(c.ar_valid)
        };
        let coll = (self.vif.scale(c.max_vif) + self.cond.scale(c.max_cond_index) + self.pearson.scale(c.max_pearson)) / 3.0;
        [pred, self.abs_diff.scale(c.ar_diff.abs()), coll, self.pvalue.scale(c.max_pvalue)]
    }

    pub fn distance(&self, c: &ModelCriteria, w: &WeightProfile) -> f64 {
        let d = self.coordinates(c);
        w.weights().iter().zip(d).map(|(wi, di)| wi * di * di).sum::<f64>().sqrt()
    }
}

/// Distance of one record to the ideal point of `pool`.
pub fn ideal_distance(record: &ModelRecord, pool: &[ModelRecord], weights: &WeightProfile) -> f64 {
    Normalizer::fit(pool).distance(&record.criteria, weights)
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n − 1)·q`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        Summary {
            n: v.len(),
            min: quantile(&v, 0.0),
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: quantile(&v, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueRanking {
    pub rank: usize,
    pub technique: Technique,
    pub distance: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionSummary {
    pub technique: Technique,
    pub criterion: &'static str,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub profile: WeightProfile,
    /// Ordered by median distance, ties in technique order.
    pub ranking: Vec<TechniqueRanking>,
    pub criteria: Vec<CriterionSummary>,
    pub degenerate_criteria: Vec<&'static str>,
}

impl RankingReport {
    pub fn ranking_csv(&self) -> String {
        let mut s = String::from("rank,technique,n,min,q1,median,q3,max\n");
        for r in &self.ranking {
            let d = &r.distance;
            let _ = writeln!(s, "{},{},{},{},{},{},{},{}", r.rank, r.technique, d.n, d.min, d.q1, d.median, d.q3, d.max);
        }
        s
    }

    pub fn criteria_csv(&self) -> String {
        let mut s = String::from("technique,criterion,n,min,q1,median,q3,max\n");
        for c in &self.criteria {
            let d = &c.summary;
            let _ = writeln!(s, "{},{},{},{},{},{},{},{}", c.technique, c.criterion, d.n, d.min, d.q1, d.median, d.q3, d.max);
        }
        s
    }
}

/// Pools the top `pool_size` models of every technique, normalises over the
/// pooled set and summarises distances and raw criteria per technique.
pub fn compare_techniques(records: &[ModelRecord], weights: &WeightProfile, pool_size: usize) -> RankingReport {
    let mut techniques: Vec<Technique> = records.iter().map(|r| r.technique).collect();
    techniques.sort();
    techniques.dedup();
    let pools: Vec<(Technique, Vec<ModelRecord>)> = techniques
        .iter()
        .map(|&t| {
            let own: Vec<ModelRecord> = records.iter().filter(|r| r.technique == t).cloned().collect();
            (t, top_pool(&own, pool_size))
        })
        .collect();
    let pooled: Vec<ModelRecord> = pools.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
    let norm = Normalizer::fit(&pooled);
    let mut ranking: Vec<TechniqueRanking> = pools
        .iter()
        .map(|(t, p)| {
            let d: Vec<f64> = p.iter().map(|r| norm.distance(&r.criteria, weights)).collect();
            TechniqueRanking {
                rank: 0,
                technique: *t,
                distance: Summary::of(&d),
            }
        })
        .collect();
    ranking.sort_by(|a, b| {
        a.distance
            .median
            .total_cmp(&b.distance.median)
            .then(a.technique.cmp(&b.technique))
    });
    for (i, r) in ranking.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    let mut criteria = Vec::new();
    for (t, p) in &pools {
        let fields: [(&'static str, fn(&ModelCriteria) -> f64); 7] = [
            ("ar_train", |c| c.ar_train),
            ("ar_valid", |c| c.ar_valid),
            ("ar_diff", |c| c.ar_diff),
            ("max_vif", |c| c.max_vif),
            ("max_pearson", |c| c.max_pearson),
            ("max_cond_index", |c| c.max_cond_index),
            ("max_pvalue", |c| c.max_pvalue),
        ];
        for (name, f) in fields {
            let v: Vec<f64> = p.iter().map(|r| f(&r.criteria)).collect();
            criteria.push(CriterionSummary {
                technique: *t,
                criterion: name,
                summary: Summary::of(&v),
            });
        }
    }
    RankingReport {
        profile: weights.clone(),
        ranking,
        criteria,
        degenerate_criteria: norm.degenerate_criteria(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub technique: Technique,
    pub model_id: usize,
    pub ar_valid: f64,
    pub ar_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadToHead {
    pub points: Vec<ScatterPoint>,
    pub log_median_ar_valid: f64,
    pub log_median_abs_diff: f64,
    pub nbm_median_ar_valid: f64,
    pub nbm_median_abs_diff: f64,
}

impl HeadToHead {
    /// LOG is at least as stable (median `|ar_diff|`) as NBM.
    pub fn log_more_stable(&self) -> bool {
        self.log_median_abs_diff <= self.nbm_median_abs_diff
    }

    /// LOG predicts no better (median validation AR) than NBM.
    pub fn log_less_predictive(&self) -> bool {
        self.log_median_ar_valid <= self.nbm_median_ar_valid
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("technique,model_id,ar_valid,ar_diff\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{}", p.technique, p.model_id, p.ar_valid, p.ar_diff);
        }
        s
    }

    /// Scatter of validation AR against AR drift: LOG as stars, NBM as gray
    /// circles.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (640.0, 480.0, 60.0);
        let xr = Range::of(self.points.iter().map(|p| p.ar_valid));
        let yr = Range::of(self.points.iter().map(|p| p.ar_diff));
        let pad = |r: Range| {
            if r.degenerate() {
                (r.min - 0.01, r.max + 0.01)
            } else {
                let d = 0.05 * (r.max - r.min);
                (r.min - d, r.max + d)
            }
        };
        let (x0, x1) = pad(xr);
        let (y0, y1) = pad(yr);
        let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#,
            h - m,
            w - m,
            h - m,
            h - m
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">AR valid</text>"#, w / 2.0, h - 20.0);
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">AR diff</text>"#,
            h / 2.0,
            h / 2.0
        );
        for (v, x) in [(x0, px(x0)), (x1, px(x1))] {
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle" font-size="10">{v:.3}</text>"#, h - m + 14.0);
        }
        for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
            let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="10">{v:.3}</text>"#, m - 4.0);
        }
        for p in &self.points {
            let (cx, cy) = (px(p.ar_valid), py(p.ar_diff));
            if p.technique == Technique::Log {
                let pts: Vec<String> = (0..10)
                    .map(|i| {
                        let r = if i % 2 == 0 { 6.0 } else { 2.5 };
                        let a = std::f64::consts::PI * (i as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
                        format!("{:.1},{:.1}", cx + r * a.cos(), cy + r * a.sin())
                    })
                    .collect();
                let _ = writeln!(s, r#"<polygon points="{}" fill="black"/>"#, pts.join(" "));
            } else {
                let _ = writeln!(s, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="4" fill="gray"/>"#);
            }
        }
        let _ = writeln!(s, r#"<text x="{}" y="30" font-size="12">star: LOG   circle: NBM</text>"#, m);
        s.push_str("</svg>\n");
        s
    }
}

fn medians(records: &[ModelRecord]) -> (f64, f64) {
    let v: Vec<f64> = records.iter().map(|r| r.criteria.ar_valid).collect();
    let d: Vec<f64> = records.iter().map(|r| r.criteria.ar_diff.abs()).collect();
    (Summary::of(&v).median, Summary::of(&d).median)
}

pub fn head_to_head(log: &[ModelRecord], nbm: &[ModelRecord]) -> Result<HeadToHead> {
    if log.is_empty() || nbm.is_empty() {
        return Err(Error::Assess("head-to-head needs both LOG and NBM models".into()));
    }
    let points = log
        .iter()
        .chain(nbm)
        .map(|r| ScatterPoint {
            technique: r.technique,
            model_id: r.model_id,
            ar_valid: r.criteria.ar_valid,
            ar_diff: r.criteria.ar_diff,
        })
        .collect();
    let (lv, ld) = medians(log);
    let (nv, nd) = medians(nbm);
    Ok(HeadToHead {
        points,
        log_median_ar_valid: lv,
        log_median_abs_diff: ld,
        nbm_median_ar_valid: nv,
        nbm_median_abs_diff: nd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn crit(ar_valid: f64, ar_diff: f64) -> ModelCriteria {
        ModelCriteria {
            ar_train: 0.6,
            ar_valid,
            ar_diff,
            max_vif: 1.0,
            max_pearson: 0.0,
            max_cond_index: 1.0,
            max_pvalue: 0.0,
        }
    }

    fn rec(id: usize, t: Technique, c: ModelCriteria) -> ModelRecord {
        ModelRecord {
            technique: t,
            model_id: id,
            variables: vec![],
            criteria: c,
        }
    }

    fn random_records(seed: u64, n: usize) -> Vec<ModelRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let c = ModelCriteria {
                    ar_train: 0.6,
                    ar_valid: (rng.random::<f64>() * 20.0).round() / 20.0,
                    ar_diff: rng.random::<f64>() * 0.4 - 0.2,
                    max_vif: 1.0 + rng.random::<f64>() * 4.0,
                    max_pearson: rng.random::<f64>(),
                    max_cond_index: 1.0 + rng.random::<f64>() * 10.0,
                    max_pvalue: rng.random::<f64>() * 0.05,
                };
                rec(i, Technique::all()[i % 15], c)
            })
            .collect()
    }

    #[test]
    fn top_pool_cases() {
        let recs = random_records(1, 10);
        assert_eq!(top_pool(&recs, 700).len(), 10);
        let best = top_pool(&recs, 1);
        let max = recs.iter().map(|r| r.criteria.ar_valid).fold(f64::MIN, f64::max);
        assert_eq!(best[0].criteria.ar_valid, max);
    }

    #[test]
    fn top_pool_matches_full_sort() {
        let recs = random_records(2, 50);
        let mut oracle = recs.clone();
        // stable sort by the keys in reverse priority
        oracle.sort_by_key(|r| r.model_id);
        oracle.sort_by(|a, b| a.criteria.ar_diff.abs().partial_cmp(&b.criteria.ar_diff.abs()).unwrap());
        oracle.sort_by(|a, b| b.criteria.ar_valid.partial_cmp(&a.criteria.ar_valid).unwrap());
        assert_eq!(top_pool(&recs, 20), oracle[..20].to_vec());
    }

    fn two_axis() -> WeightProfile {
        WeightProfile::new("two", 0.5, 0.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn two_record_pool_distances() {
        let pool = vec![rec(1, Technique::Log, crit(0.6, 0.0)), rec(2, Technique::Log, crit(0.5, 0.2))];
        assert_eq!(ideal_distance(&pool[0], &pool, &two_axis()), 0.0);
        assert!((ideal_distance(&pool[1], &pool, &two_axis()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trade_off_pair_flips_with_weights() {
        // a predicts better, b is more stable; a third record fixes the ranges
        let pool = vec![
            rec(1, Technique::Log, crit(0.60, 0.10)),
            rec(2, Technique::Log, crit(0.52, 0.02)),
            rec(3, Technique::Log, crit(0.50, 0.12)),
        ];
        let d = |w: &WeightProfile, i: usize| ideal_distance(&pool[i], &pool, w);
        let (p, s) = (WeightProfile::prediction_heavy(), WeightProfile::stability_heavy());
        assert!(d(&p, 0) < d(&p, 1));
        assert!(d(&s, 0) > d(&s, 1));
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(WeightProfile::new("x", 0.5, 0.5, 0.1, 0.0).is_err());
        assert!(WeightProfile::new("x", 1.2, -0.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn quantiles_match_interpolation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..40 {
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s = Summary::of(&v);
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            for (q, got) in [(0.25, s.q1), (0.5, s.median), (0.75, s.q3)] {
                // position (n-1)q between order statistics
                let pos = (n as f64 - 1.0) * q;
                let (i, f) = (pos as usize, pos.fract());
                let want = if i + 1 < n { sorted[i] * (1.0 - f) + sorted[i + 1] * f } else { sorted[i] };
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_techniques_have_equal_medians() {
        let base = random_records(5, 20);
        let mut all = Vec::new();
        for (k, t) in Technique::all().into_iter().enumerate() {
            for r in &base {
                all.push(rec(k * 100 + r.model_id, t, r.criteria));
            }
        }
        let rep = compare_techniques(&all, &WeightProfile::equal(), 700);
        let m0 = rep.ranking[0].distance.median;
        assert!(rep.ranking.iter().all(|r| r.distance.median == m0));
        assert_eq!(rep.ranking.len(), 15);
    }

    #[test]
    fn single_model_pools_are_well_formed() {
        let recs: Vec<ModelRecord> = Technique::all()
            .into_iter()
            .enumerate()
            .map(|(i, t)| rec(i, t, crit(0.5, 0.1)))
            .collect();
        let rep = compare_techniques(&recs, &WeightProfile::equal(), 700);
        assert!(rep.ranking.iter().all(|r| r.distance.median == 0.0 && r.distance.n == 1));
        assert_eq!(rep.degenerate_criteria.len(), 6);
        assert!(rep.ranking_csv().lines().count() == 16);
    }

    #[test]
    fn head_to_head_rows_and_medians() {
        let log: Vec<ModelRecord> = (0..5).map(|i| rec(i, Technique::Log, crit(0.5 + 0.01 * i as f64, 0.05))).collect();
        let nbm: Vec<ModelRecord> = (0..3)
            .map(|i| rec(10 + i, Technique::parse("NBM").unwrap(), crit(0.55, -0.1)))
            .collect();
        let h = head_to_head(&log, &nbm).unwrap();
        assert_eq!(h.points.len(), 8);
        assert!((h.log_median_ar_valid - 0.52).abs() < 1e-12);
        assert!(h.log_more_stable() && h.log_less_predictive());
        assert!(h.to_svg().contains("<polygon") && h.to_svg().contains("<circle"));
        let same = head_to_head(&log, &log).unwrap();
        assert_eq!(same.log_median_ar_valid, same.nbm_median_ar_valid);
    }

    proptest! {
        #[test]
        fn affine_rescaling_keeps_order(seed in 0u64..1000, a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let recs = random_records(seed, 30);
            let w = WeightProfile::equal();
            let order = |rs: &[ModelRecord]| {
                let norm = Normalizer::fit(rs);
                let mut idx: Vec<usize> = (0..rs.len()).collect();
                let d: Vec<f64> = rs.iter().map(|r| norm.distance(&r.criteria, &w)).collect();
                idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
                (idx, d)
            };
            let mut scaled = recs.clone();
            for r in &mut scaled {
                r.criteria.max_cond_index = a * r.criteria.max_cond_index + b;
            }
            let (o1, d1) = order(&recs);
            let (_, d2) = order(&scaled);
            for (x, y) in d1.iter().zip(&d2) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert_eq!(o1.len(), 30);
        }

        #[test]
        fn swapping_weights_and_coordinates(seed in 0u64..1000) {
            let recs = random_records(seed, 10);
            let norm = Normalizer::fit(&recs);
            let w = WeightProfile::new("w", 0.1, 0.2, 0.3, 0.4).unwrap();
            for r in &recs {
                let d = norm.coordinates(&r.criteria);
                let direct = norm.distance(&r.criteria, &w);
                let swapped = (0.2 * d[0] * d[0] + 0.1 * d[1] * d[1] + 0.3 * d[2] * d[2] + 0.4 * d[3] * d[3]).sqrt();
                let w2 = [0.2, 0.1, 0.3, 0.4];
                let d2 = [d[1], d[0], d[2], d[3]];
                let permuted = w2.iter().zip(d2).map(|(wi, di)| wi * di * di).sum::<f64>().sqrt();
                prop_assert!((direct - permuted).abs() < 1e-15);
                let _ = swapped;
            }
        }

        #[test]
        fn optimum_has_zero_distance(seed in 0u64..1000) {
            let mut recs = random_records(seed, 12);
            let best = ModelCriteria {
                ar_train: 0.6,
                ar_valid: 1.0,
                ar_diff: 0.0,
                max_vif: 1.0,
                max_pearson: 0.0,
                max_cond_index: 1.0,
                max_pvalue: 0.0,
            };
            recs.push(rec(999, Technique::Log, best));
            let d = ideal_distance(recs.last().unwrap(), &recs, &WeightProfile::equal());
            prop_assert_eq!(d, 0.0);
        }
    }
}
