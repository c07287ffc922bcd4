//! Columnar datasets, CSV storage with an optional schema sidecar, and
//! out-of-time train/validation partitioning.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Integer `YYYYMM`.
    Period,
    /// Binary 0/1 default flag.
    Target,
    Id,
    /// Simulation internals kept for diagnostics, never used as predictors.
    Latent,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Period => "period",
            ColumnKind::Target => "target",
            ColumnKind::Id => "id",
            ColumnKind::Latent => "latent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim() {
            "numeric" => ColumnKind::Numeric,
            "categorical" => ColumnKind::Categorical,
            "period" => ColumnKind::Period,
            "target" => ColumnKind::Target,
            "id" => ColumnKind::Id,
            "latent" => ColumnKind::Latent,
            _ => return None,
        })
    }

    pub fn is_predictor(self) -> bool {
        matches!(self, ColumnKind::Numeric | ColumnKind::Categorical)
    }
}

/// Column storage; `None` is the missing marker.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Numeric(v) => v.len(),
            Values::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match self {
            Values::Numeric(v) => Some(v),
            Values::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&[Option<String>]> {
        match self {
            Values::Text(v) => Some(v),
            Values::Numeric(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Values {
        match self {
            Values::Numeric(v) => Values::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Values::Text(v) => Values::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }

    fn format(&self, row: usize) -> String {
        match self {
            Values::Numeric(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            Values::Text(v) => v[row].clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Values,
}

impl Column {
    pub fn numeric(name: impl Into<String>, kind: ColumnKind, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            kind,
            values: Values::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
            values: Values::Text(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    /// Builds a dataset, checking column lengths, name uniqueness and the
    /// value domains of target and period columns. A target column is not
    /// required here (raw generated portfolios have none); see
    /// [`Dataset::require_model_schema`].
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map(|c| c.values.len()).unwrap_or(0);
        let mut names = HashSet::new();
        for c in &columns {
            if c.values.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column {} has {} values, expected {}",
                    c.name,
                    c.values.len(),
                    n_rows
                )));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {}", c.name)));
            }
        }
        for kind in [ColumnKind::Target, ColumnKind::Period] {
            if columns.iter().filter(|c| c.kind == kind).count() > 1 {
                return Err(Error::Schema(format!("more than one {} column", kind.as_str())));
            }
        }
        for c in &columns {
            match c.kind {
                ColumnKind::Target => check_target(c)?,
                ColumnKind::Period => check_period(c)?,
                ColumnKind::Categorical if c.values.as_text().is_none() => {
                    return Err(Error::Schema(format!("categorical column {} holds numbers", c.name)))
                }
                _ => {}
            }
        }
        Ok(Dataset { columns, n_rows })
    }

    /// Exactly one target and one period column must exist.
    pub fn require_model_schema(&self) -> Result<()> {
        for kind in [ColumnKind::Target, ColumnKind::Period] {
            if !self.columns.iter().any(|c| c.kind == kind) {
                return Err(Error::Schema(format!("missing {} column", kind.as_str())));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_of_kind(&self, kind: ColumnKind) -> Option<&Column> {
        self.columns.iter().find(|c| c.kind == kind)
    }

    pub fn predictors(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.kind.is_predictor())
    }

    pub fn targets(&self) -> Result<Vec<u8>> {
        let col = self
            .column_of_kind(ColumnKind::Target)
            .ok_or_else(|| Error::Schema("missing target column".into()))?;
        let v = col.values.as_numeric().expect("validated target column");
        Ok(v.iter().map(|x| x.expect("validated target") as u8).collect())
    }

    pub fn periods(&self) -> Result<Vec<i64>> {
        let col = self
            .column_of_kind(ColumnKind::Period)
            .ok_or_else(|| Error::Schema("missing period column".into()))?;
        let v = col.values.as_numeric().expect("validated period column");
        Ok(v.iter().map(|x| x.expect("validated period") as i64).collect())
    }

    pub fn push_column(&mut self, column: Column) -> Result<()> {
        let mut cols = std::mem::take(&mut self.columns);
        cols.push(column);
        *self = Dataset::new(cols)?;
        Ok(())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: c.values.select(rows),
                })
                .collect(),
            n_rows: rows.len(),
        }
    }

    /// Canonical CSV text: header row, numbers in shortest round-trip form,
    /// empty field for missing.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(self.columns.len());
        for r in 0..self.n_rows {
            record.clear();
            record.extend(self.columns.iter().map(|c| c.values.format(r)));
            w.write_record(&record)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn schema_string(&self) -> String {
        let mut s = String::new();
        for c in &self.columns {
            let _ = writeln!(s, "{}={}", c.name, c.kind.as_str());
        }
        s
    }
}

fn check_target(c: &Column) -> Result<()> {
    let v = c
        .values
        .as_numeric()
        .ok_or_else(|| Error::Schema(format!("target column {} is not numeric", c.name)))?;
    for (i, x) in v.iter().enumerate() {
        match x {
            Some(t) if *t == 0.0 || *t == 1.0 => {}
            other => {
                return Err(Error::BadRow {
                    row: i + 1,
                    message: format!("target value {other:?} outside {{0,1}}"),
                })
            }
        }
    }
    Ok(())
}

fn check_period(c: &Column) -> Result<()> {
    let v = c
        .values
        .as_numeric()
        .ok_or_else(|| Error::Schema(format!("period column {} is not numeric", c.name)))?;
    for (i, x) in v.iter().enumerate() {
        let ok = match x {
            Some(p) if p.fract() == 0.0 => {
                let month = (*p as i64).rem_euclid(100);
                (1..=12).contains(&month)
            }
            _ => false,
        };
        if !ok {
            return Err(Error::BadRow {
                row: i + 1,
                message: format!("period value {x:?} is not a YYYYMM integer"),
            });
        }
    }
    Ok(())
}

/// `YYYYMM` shifted by a number of months.
pub fn period_offset(start: i64, months: i64) -> i64 {
    let idx = (start / 100) * 12 + (start % 100 - 1) + months;
    (idx.div_euclid(12)) * 100 + idx.rem_euclid(12) + 1
}

/// Whole months from `a` to `b`.
pub fn period_diff(a: i64, b: i64) -> i64 {
    ((b / 100) * 12 + b % 100) - ((a / 100) * 12 + a % 100)
}

pub fn schema_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".schema");
    PathBuf::from(s)
}

/// Writes `path` and its `path.schema` sidecar.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset.to_csv_string()?).map_err(|e| Error::io(path, e))?;
    let sidecar = schema_path(path);
    fs::write(&sidecar, dataset.schema_string()).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

fn parse_schema(text: &str) -> Result<Vec<(String, ColumnKind)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, kind) = line.split_once('=').ok_or(Error::Parse {
            line: i + 1,
            message: format!("expected name=kind, got {line:?}"),
        })?;
        let kind = ColumnKind::parse(kind).ok_or(Error::Parse {
            line: i + 1,
            message: format!("unknown column kind {kind:?}"),
        })?;
        out.push((name.trim().to_string(), kind));
    }
    Ok(out)
}

fn infer_kind(name: &str, raw: &[&str]) -> ColumnKind {
    match name {
        "target" => return ColumnKind::Target,
        "period" => return ColumnKind::Period,
        "id" | "account_id" => return ColumnKind::Id,
        _ => {}
    }
    if name.starts_with("latent_") {
        return ColumnKind::Latent;
    }
    if raw.iter().all(|s| s.is_empty() || s.parse::<f64>().is_ok()) {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

/// Loads a CSV file. Column kinds come from a `path.schema` sidecar when one
/// exists; otherwise they are inferred (`target`, `period`, `id`/`account_id`
/// and `latent_*` by name, then numeric if every non-empty field parses).
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sidecar = schema_path(path);
    let declared = if sidecar.exists() {
        let s = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        Some(parse_schema(&s)?)
    } else {
        None
    };
    parse_csv(&text, declared.as_deref())
}

pub fn parse_csv(text: &str, declared: Option<&[(String, ColumnKind)]>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    if header.is_empty() {
        return Err(Error::Schema("header row is empty".into()));
    }
    let width = header.len();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); width];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::BadRow {
                row: i + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            raw[j].push(field.to_string());
        }
    }

    let mut columns = Vec::with_capacity(width);
    for (j, name) in header.iter().enumerate() {
        let fields: Vec<&str> = raw[j].iter().map(|s| s.as_str()).collect();
        let kind = match declared {
            Some(d) => d
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, k)| *k)
                .ok_or_else(|| Error::Schema(format!("column {name} missing from schema sidecar")))?,
            None => infer_kind(name, &fields),
        };
        let numeric_ok = fields.iter().all(|s| s.is_empty() || s.parse::<f64>().is_ok());
        let values = match kind {
            ColumnKind::Categorical => Values::Text(
                fields
                    .iter()
                    .map(|s| (!s.is_empty()).then(|| s.to_string()))
                    .collect(),
            ),
            ColumnKind::Id | ColumnKind::Latent if !numeric_ok => Values::Text(
                fields
                    .iter()
                    .map(|s| (!s.is_empty()).then(|| s.to_string()))
                    .collect(),
            ),
            _ => {
                let mut v = Vec::with_capacity(fields.len());
                for (i, s) in fields.iter().enumerate() {
                    if s.is_empty() {
                        v.push(None);
                    } else {
                        let x = s.parse::<f64>().map_err(|_| Error::BadRow {
                            row: i + 1,
                            message: format!("column {name}: {s:?} is not a number"),
                        })?;
                        v.push(Some(x));
                    }
                }
                Values::Numeric(v)
            }
        };
        columns.push(Column {
            name: name.clone(),
            kind,
            values,
        });
    }
    let ds = Dataset::new(columns)?;
    ds.require_model_schema()?;
    Ok(ds)
}

#[derive(Debug, Clone)]
pub struct TimePartition {
    pub boundary: i64,
    pub train: Dataset,
    pub valid: Dataset,
}

impl TimePartition {
    pub fn counts(&self) -> (usize, usize) {
        (self.train.n_rows(), self.valid.n_rows())
    }
}

/// Rows with period ≤ `boundary` train the model, later rows validate it.
pub fn time_partition(dataset: &Dataset, boundary: i64) -> Result<TimePartition> {
    let periods = dataset.periods()?;
    let (train_rows, valid_rows): (Vec<usize>, Vec<usize>) =
        (0..periods.len()).partition(|&i| periods[i] <= boundary);
    if train_rows.is_empty() || valid_rows.is_empty() {
        return Err(Error::OneSidedPartition { boundary });
    }
    Ok(TimePartition {
        boundary,
        train: dataset.select_rows(&train_rows),
        valid: dataset.select_rows(&valid_rows),
    })
}

/// Default boundary: the last period of the first two thirds of distinct
/// periods.
pub fn default_boundary(dataset: &Dataset) -> Result<i64> {
    let mut periods = dataset.periods()?;
    periods.sort_unstable();
    periods.dedup();
    if periods.len() < 2 {
        return Err(Error::Schema("need at least two distinct periods to partition".into()));
    }
    let idx = ((periods.len() * 2) / 3).clamp(1, periods.len() - 1) - 1;
    Ok(periods[idx])
}

/// Keeps a seeded random `fraction` of rows (original order preserved).
pub fn subsample(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("subsample fraction {fraction} not in (0,1]")));
    }
    if fraction == 1.0 {
        return Ok(dataset.clone());
    }
    let n = dataset.n_rows();
    let k = ((n as f64) * fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = sample(&mut rng, n, k).into_vec();
    rows.sort_unstable();
    Ok(dataset.select_rows(&rows))
}
