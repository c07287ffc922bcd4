use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};

use super::matrix::{modulated_matrix, TransitionMatrix};
use super::GeneratorConfig;
use crate::dataio::{period_offset, Column, ColumnKind, Dataset};
use crate::error::Result;

/// Behavioural aggregates emitted as informative predictors, in the order
/// `n_informative_variables` truncates them.
pub const BEHAVIOURAL_VARIABLES: [&str; 20] = [
    "cur_bucket",
    "mob",
    "worst_3m",
    "worst_6m",
    "worst_12m",
    "ndel_3m",
    "ndel_6m",
    "ndel_12m",
    "months_since_del",
    "worst_9m",
    "ndel_9m",
    "nroll_3m",
    "nroll_6m",
    "nroll_12m",
    "ncure_6m",
    "ncure_12m",
    "current_streak",
    "nroll_9m",
    "ncure_3m",
    "ncure_9m",
];

const REGIONS: [(&str, f64); 6] = [
    ("A", -0.4),
    ("B", -0.2),
    ("C", 0.0),
    ("D", 0.1),
    ("E", 0.2),
    ("F", 0.4),
];
const PRODUCTS: [(&str, f64); 3] = [("card", -0.2), ("cash", 0.0), ("instal", 0.2)];
const APP_LEVELS: [(&str, f64); 4] = [("K1", -0.3), ("K2", -0.1), ("K3", 0.1), ("K4", 0.3)];

// rng stream tags
const STREAM_APP: u64 = 1;
const STREAM_STEP: u64 = 2;
const STREAM_SCORE: u64 = 3;
const STREAM_NOISE: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum AppValue {
    Numeric(f64),
    Level(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Account {
    pub id: u64,
    pub open_month: i64,
    pub age: f64,
    pub income: Option<f64>,
    pub region: &'static str,
    pub product: &'static str,
    pub app_values: Vec<AppValue>,
    /// Time-invariant part of the latent score.
    pub base_score: f64,
    /// Score of the latest simulated month; higher is safer.
    pub latent_score: f64,
    /// `(month, bucket)` for consecutive months from `open_month`.
    pub state_history: Vec<(i64, usize)>,
}

impl Account {
    pub fn state(&self) -> usize {
        self.state_history.last().map(|&(_, s)| s).unwrap_or(0)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn keyed_rng(seed: u64, account: u64, month: i64, stream: u64) -> ChaCha8Rng {
    let k = splitmix(splitmix(splitmix(splitmix(seed) ^ account) ^ month as u64) ^ stream);
    ChaCha8Rng::seed_from_u64(k)
}

/// Random stream for one account's migration in one month.
pub fn account_rng(seed: u64, account: u64, month: i64) -> ChaCha8Rng {
    keyed_rng(seed, account, month, STREAM_STEP)
}

/// Samples the next bucket. `rank` is the account's score rank within its
/// current bucket scaled to [0,1] (0 = worst score). The worsening mass `w`
/// of the row becomes `w (1 + k (1 - 2 rank))` with `k = min(tilt, (1-w)/w)`,
/// which averages back to `w` over a bucket's ranks.
pub fn step_account(
    account: &Account,
    rank: f64,
    matrix: &TransitionMatrix,
    tilt: f64,
    rng: &mut impl Rng,
) -> usize {
    let from = account.state();
    if matrix.is_absorbing(from) {
        return from;
    }
    let row = matrix.row(from);
    let k_states = matrix.n_states();
    let worse = matrix.worsening_mass(from);
    let p_worse = if worse > 0.0 {
        let k = tilt.min((1.0 - worse) / worse);
        (worse * (1.0 + k * (1.0 - 2.0 * rank))).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let pick = |worsening: bool, mass: f64| -> usize {
        let mut acc = 0.0;
        let target = v * mass;
        let mut last = from;
        for j in 0..k_states {
            if matrix.is_worsening(from, j) == worsening && row[j] > 0.0 {
                acc += row[j];
                last = j;
                if target < acc {
                    return j;
                }
            }
        }
        last
    };
    if u < p_worse {
        pick(true, worse)
    } else {
        pick(false, 1.0 - worse)
    }
}

/// Ranks the live accounts within each bucket by `latent_score` (ties by id)
/// and steps each one to `month`.
pub fn migrate_month(
    accounts: &mut [Account],
    month: i64,
    matrix: &TransitionMatrix,
    tilt: f64,
    seed: u64,
) {
    let k = matrix.n_states();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, a) in accounts.iter().enumerate() {
        if a.open_month < month {
            groups[a.state()].push(i);
        }
    }
    let mut next = vec![0usize; accounts.len()];
    for group in groups.iter_mut() {
        group.sort_by(|&a, &b| {
            accounts[a]
                .latent_score
                .total_cmp(&accounts[b].latent_score)
                .then(accounts[a].id.cmp(&accounts[b].id))
        });
        let n = group.len();
        for (r, &i) in group.iter().enumerate() {
            let rank = if n > 1 { r as f64 / (n - 1) as f64 } else { 0.5 };
            let mut rng = account_rng(seed, accounts[i].id, month);
            next[i] = step_account(&accounts[i], rank, matrix, tilt, &mut rng);
        }
    }
    for group in &groups {
        for &i in group {
            accounts[i].state_history.push((month, next[i]));
        }
    }
}

fn new_account(cfg: &GeneratorConfig, id: u64, month: i64, start_state: usize) -> Account {
    let mut rng = keyed_rng(cfg.seed, id, month, STREAM_APP);
    let age: f64 = rng.random_range(18.0..70.0);
    let income_draw: f64 = LogNormal::new(8.0, 0.5).expect("valid lognormal").sample(&mut rng);
    let income = (rng.random::<f64>() >= 0.05).then_some((income_draw * 100.0).round() / 100.0);
    let region = REGIONS[rng.random_range(0..REGIONS.len())];
    let product = PRODUCTS[rng.random_range(0..PRODUCTS.len())];
    let mut score = 0.45 * (age - 44.0) / 15.0
        + match income {
            Some(x) => 0.45 * (x.ln() - 8.0) / 0.5,
            None => -0.2,
        }
        + region.1
        + product.1;
    let mut app_values = Vec::with_capacity(cfg.n_app_variables);
    for k in 0..cfg.n_app_variables {
        if k % 2 == 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            score += 0.25 * z;
            app_values.push(AppValue::Numeric(z));
        } else {
            let lvl = APP_LEVELS[rng.random_range(0..APP_LEVELS.len())];
            score += lvl.1;
            app_values.push(AppValue::Level(lvl.0));
        }
    }
    let idio: f64 = StandardNormal.sample(&mut rng);
    score += 0.8 * idio;
    Account {
        id,
        open_month: month,
        age: age.floor(),
        income,
        region: region.0,
        product: product.0,
        app_values,
        base_score: score,
        latent_score: score,
        state_history: vec![(month, start_state)],
    }
}

/// Behavioural aggregates over an account's bucket history up to the
/// current month.
struct History<'a> {
    states: Vec<usize>,
    severity: &'a [u8],
    closed: &'a [bool],
}

impl History<'_> {
    fn sev(&self, i: usize) -> u8 {
        self.severity[self.states[i]]
    }

    fn tail(&self, w: usize) -> std::ops::Range<usize> {
        let n = self.states.len();
        n.saturating_sub(w)..n
    }

    fn worst(&self, w: usize) -> f64 {
        self.tail(w).map(|i| self.sev(i)).max().unwrap_or(0) as f64
    }

    fn ndel(&self, w: usize) -> f64 {
        self.tail(w).filter(|&i| self.sev(i) > 0).count() as f64
    }

    fn nroll(&self, w: usize) -> f64 {
        self.tail(w)
            .filter(|&i| i > 0 && self.sev(i) > self.sev(i - 1))
            .count() as f64
    }

    fn ncure(&self, w: usize) -> f64 {
        self.tail(w)
            .filter(|&i| {
                i > 0 && self.sev(i - 1) > 0 && self.sev(i) == 0 && !self.closed[self.states[i]]
            })
            .count() as f64
    }

    fn months_since_del(&self) -> Option<f64> {
        let n = self.states.len();
        (0..n).rev().find(|&i| self.sev(i) > 0).map(|i| (n - 1 - i) as f64)
    }

    fn current_streak(&self) -> f64 {
        self.states
            .iter()
            .rev()
            .take_while(|&&s| self.severity[s] == 0 && !self.closed[s])
            .count() as f64
    }

    fn feature(&self, name: &str, mob: f64) -> Option<f64> {
        let n = self.states.len();
        Some(match name {
            "cur_bucket" => self.sev(n - 1) as f64,
            "mob" => mob,
            "worst_3m" => self.worst(3),
            "worst_6m" => self.worst(6),
            "worst_9m" => self.worst(9),
            "worst_12m" => self.worst(12),
            "ndel_3m" => self.ndel(3),
            "ndel_6m" => self.ndel(6),
            "ndel_9m" => self.ndel(9),
            "ndel_12m" => self.ndel(12),
            "nroll_3m" => self.nroll(3),
            "nroll_6m" => self.nroll(6),
            "nroll_9m" => self.nroll(9),
            "nroll_12m" => self.nroll(12),
            "ncure_3m" => self.ncure(3),
            "ncure_6m" => self.ncure(6),
            "ncure_9m" => self.ncure(9),
            "ncure_12m" => self.ncure(12),
            "months_since_del" => return self.months_since_del(),
            "current_streak" => self.current_streak(),
            other => unreachable!("unknown behavioural variable {other}"),
        })
    }
}

enum Sink {
    Num(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

struct ColumnBuilder {
    name: String,
    kind: ColumnKind,
    sink: Sink,
}

impl ColumnBuilder {
    fn num(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnBuilder {
            name: name.into(),
            kind,
            sink: Sink::Num(Vec::new()),
        }
    }

    fn text(name: impl Into<String>) -> Self {
        ColumnBuilder {
            name: name.into(),
            kind: ColumnKind::Categorical,
            sink: Sink::Text(Vec::new()),
        }
    }

    fn push_num(&mut self, v: Option<f64>) {
        match &mut self.sink {
            Sink::Num(xs) => xs.push(v),
            Sink::Text(_) => unreachable!("numeric push into text column"),
        }
    }

    fn push_text(&mut self, v: Option<&str>) {
        match &mut self.sink {
            Sink::Text(xs) => xs.push(v.map(str::to_string)),
            Sink::Num(_) => unreachable!("text push into numeric column"),
        }
    }

    fn finish(self) -> Column {
        match self.sink {
            Sink::Num(v) => Column::numeric(self.name, self.kind, v),
            Sink::Text(v) => Column {
                name: self.name,
                kind: self.kind,
                values: crate::dataio::Values::Text(v),
            },
        }
    }
}

/// Simulates the portfolio and emits one row per (account, month) for every
/// emitted month at or after the account's opening, closed accounts
/// included. Row order is month-major, then account id.
pub fn generate_portfolio(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let kernel = cfg.risk_matrix()?;
    let first = -(cfg.burn_in_months as i64);
    let last = cfg.months as i64 - 1;
    let matrices = (first..=last)
        .map(|m| modulated_matrix(&kernel, cfg.macro_cycle.value(m), cfg.macro_sensitivity))
        .collect::<Result<Vec<_>>>()?;

    let states = kernel.states();
    let mut open_states: Vec<usize> = (0..states.len()).filter(|&i| !states[i].closed).collect();
    open_states.sort_by_key(|&i| states[i].dpd_low);
    let mut severity = vec![0u8; states.len()];
    for (rank, &i) in open_states.iter().enumerate() {
        severity[i] = rank as u8;
    }
    let closed: Vec<bool> = states.iter().map(|b| b.closed).collect();
    let start_state = open_states[0];

    let behavioural = &BEHAVIOURAL_VARIABLES[..cfg.n_informative_variables];
    let mut cols: Vec<ColumnBuilder> = vec![
        ColumnBuilder::num("account_id", ColumnKind::Id),
        ColumnBuilder::num("period", ColumnKind::Period),
        ColumnBuilder::num("age", ColumnKind::Numeric),
        ColumnBuilder::num("income", ColumnKind::Numeric),
        ColumnBuilder::text("region"),
        ColumnBuilder::text("product"),
    ];
    for k in 0..cfg.n_app_variables {
        let name = format!("app_{}", k + 1);
        cols.push(if k % 2 == 0 {
            ColumnBuilder::num(name, ColumnKind::Numeric)
        } else {
            ColumnBuilder::text(name)
        });
    }
    for name in behavioural {
        cols.push(ColumnBuilder::num(*name, ColumnKind::Numeric));
    }
    for k in 1..=cfg.n_noise_variables {
        let name = format!("noise_{k}");
        cols.push(if k % 3 == 0 {
            ColumnBuilder::text(name)
        } else {
            ColumnBuilder::num(name, ColumnKind::Numeric)
        });
    }
    cols.push(ColumnBuilder::num("latent_score", ColumnKind::Latent));
    cols.push(ColumnBuilder::num("latent_dpd", ColumnKind::Latent));
    cols.push(ColumnBuilder::num("latent_closed", ColumnKind::Latent));

    let mut accounts: Vec<Account> = Vec::new();
    let mut next_id: u64 = 1;
    for (mi, month) in (first..=last).enumerate() {
        if mi > 0 {
            migrate_month(&mut accounts, month, &matrices[mi], cfg.score_tilt, cfg.seed);
        }
        for _ in 0..cfg.new_accounts_per_month {
            accounts.push(new_account(cfg, next_id, month, start_state));
            next_id += 1;
        }
        for a in accounts.iter_mut() {
            let hist = History {
                states: a.state_history.iter().map(|&(_, s)| s).collect(),
                severity: &severity,
                closed: &closed,
            };
            let mut rng = keyed_rng(cfg.seed, a.id, month, STREAM_SCORE);
            let eps: f64 = StandardNormal.sample(&mut rng);
            a.latent_score = a.base_score - 0.3 * hist.ndel(12) + 0.5 * eps;
        }
        if month < 0 {
            continue;
        }
        let period = period_offset(cfg.start_period, month) as f64;
        for a in &accounts {
            let hist = History {
                states: a.state_history.iter().map(|&(_, s)| s).collect(),
                severity: &severity,
                closed: &closed,
            };
            let mob = (month - a.open_month) as f64;
            let mut c = cols.iter_mut();
            let mut next = || c.next().expect("column layout");
            next().push_num(Some(a.id as f64));
            next().push_num(Some(period));
            next().push_num(Some(a.age));
            next().push_num(a.income);
            next().push_text(Some(a.region));
            next().push_text(Some(a.product));
            for v in &a.app_values {
                match v {
                    AppValue::Numeric(x) => next().push_num(Some(*x)),
                    AppValue::Level(l) => next().push_text(Some(l)),
                }
            }
            for name in behavioural {
                next().push_num(hist.feature(name, mob));
            }
            let mut rng = keyed_rng(cfg.seed, a.id, month, STREAM_NOISE);
            for k in 1..=cfg.n_noise_variables {
                let missing = k % 4 == 1 && rng.random::<f64>() < 0.1;
                if k % 3 == 0 {
                    let lvl = rng.random_range(1..=5);
                    next().push_text((!missing).then(|| format!("N{lvl}")).as_deref());
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    next().push_num((!missing).then_some(z));
                }
            }
            let s = a.state();
            next().push_num(Some(a.latent_score));
            next().push_num(Some(f64::from(states[s].dpd_low)));
            next().push_num(Some(if states[s].closed { 1.0 } else { 0.0 }));
        }
    }
    Dataset::new(cols.into_iter().map(ColumnBuilder::finish).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{Bucket, RiskLevel, SizePreset};

    fn cfg_tiny() -> GeneratorConfig {
        let mut c = GeneratorConfig::preset(SizePreset::Tiny, RiskLevel::Medium, 7);
        c.months = 7;
        c.new_accounts_per_month = 1;
        c.n_informative_variables = 1;
        c.n_noise_variables = 0;
        c
    }

    fn dummy_account(id: u64, state: usize, score: f64) -> Account {
        Account {
            id,
            open_month: 0,
            age: 40.0,
            income: Some(3000.0),
            region: "A",
            product: "card",
            app_values: vec![],
            base_score: score,
            latent_score: score,
            state_history: vec![(0, state)],
        }
    }

    #[test]
    fn vintages_give_triangular_row_count() {
        let ds = generate_portfolio(&cfg_tiny()).unwrap();
        assert_eq!(ds.n_rows(), 28);
    }

    #[test]
    fn reruns_are_identical_and_seed_matters() {
        let a = generate_portfolio(&cfg_tiny()).unwrap();
        let b = generate_portfolio(&cfg_tiny()).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
        let mut other = cfg_tiny();
        other.seed = 8;
        let c = generate_portfolio(&other).unwrap();
        assert_ne!(a.to_csv_string().unwrap(), c.to_csv_string().unwrap());
    }

    #[test]
    fn absorbing_and_degenerate_rows() {
        let m = TransitionMatrix::consumer_finance();
        let mut rng = account_rng(1, 1, 1);
        let paid = dummy_account(1, 5, 0.0);
        assert_eq!(step_account(&paid, 0.0, &m, 0.9, &mut rng), 5);
        let stuck = TransitionMatrix::identity(m.states().to_vec());
        let cur = dummy_account(2, 0, 0.0);
        assert_eq!(step_account(&cur, 0.0, &stuck, 0.9, &mut rng), 0);
    }

    #[test]
    fn migrations_match_row_and_favour_low_scores() {
        let states = vec![
            Bucket::dpd("CURRENT", 0, Some(0)),
            Bucket::dpd("DPD1_30", 1, Some(30)),
            Bucket::dpd("DPD31_60", 31, Some(60)),
            Bucket::closed("PAIDOFF"),
        ];
        let m = TransitionMatrix::new(
            states,
            vec![
                vec![0.9, 0.1, 0.0, 0.0],
                vec![0.5, 0.3, 0.2, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut accounts: Vec<Account> = (0..10_000)
            .map(|i| dummy_account(i, 0, StandardNormal.sample(&mut rng)))
            .collect();
        migrate_month(&mut accounts, 1, &m, 0.9, 11);
        let (moved, stayed): (Vec<&Account>, Vec<&Account>) =
            accounts.iter().partition(|a| a.state() == 1);
        let share = moved.len() as f64 / 10_000.0;
        assert!((0.095..=0.105).contains(&share), "share {share}");
        let mean = |v: &[&Account]| v.iter().map(|a| a.latent_score).sum::<f64>() / v.len() as f64;
        assert!(mean(&moved) < mean(&stayed));
    }

    #[test]
    fn history_is_consecutive() {
        let mut c = cfg_tiny();
        c.new_accounts_per_month = 20;
        c.months = 12;
        let kernel = c.risk_matrix().unwrap();
        let mut accounts: Vec<Account> = (0..20).map(|i| new_account(&c, i, 0, 0)).collect();
        for month in 1..12 {
            migrate_month(&mut accounts, month, &kernel, 0.9, 1);
        }
        for a in &accounts {
            for (k, &(m, s)) in a.state_history.iter().enumerate() {
                assert_eq!(m, a.open_month + k as i64);
                assert!(s < kernel.n_states());
            }
        }
    }
}
