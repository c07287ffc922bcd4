//! The staged experiment: every stage reads its inputs from and writes its
//! outputs to the run directory, so a run can resume at any stage.

mod config;
mod models;

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

pub use config::*;
pub use models::*;

use crate::assess::{compare_techniques, head_to_head, ModelRecord, RankingReport, Technique, WeightProfile};
use crate::binning::{apply_binning, fit_binning, BinnedData, BinningMap};
use crate::coding::{encode_reg, TrainMeans};
use crate::datagen::{assign_targets, generate_portfolio};
use crate::dataio::{default_boundary, load_csv, save_csv, time_partition, ColumnKind, Dataset, TimePartition};
use crate::error::{Error, Result};
use crate::glm::AdjustmentMethod;
use crate::subsets::{best_subsets, preselect, CandidatePool, SubsetFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Bin,
    Select,
    Fit,
    Assess,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Generate,
        Stage::Bin,
        Stage::Select,
        Stage::Fit,
        Stage::Assess,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Bin => "bin",
            Stage::Select => "select",
            Stage::Fit => "fit",
            Stage::Assess => "assess",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DATASET: &str = "dataset.csv";
pub const PARTITION: &str = "partition.txt";
pub const BINNING: &str = "binning.txt";
pub const POOL: &str = "pool.csv";
pub const SUBSETS_REG: &str = "subsets_reg.csv";
pub const SUBSETS_LOG: &str = "subsets_log.csv";
pub const CRITERIA: &str = "criteria.csv";
pub const FITS: &str = "fits.txt";
pub const LEDGER: &str = "ledger.txt";
pub const CRITERIA_SUMMARY: &str = "criteria_summary.csv";
pub const SCATTER_CSV: &str = "scatter_log_nbm.csv";
pub const SCATTER_SVG: &str = "scatter_log_nbm.svg";
pub const REPORT: &str = "report.txt";

/// Ranking file name per weight profile.
pub fn ranking_file(profile: &WeightProfile) -> String {
    let tag = match profile.name.as_str() {
        "EQUAL" => "equal",
        "STABILITY_HEAVY" => "stab",
        "PREDICTION_HEAVY" => "pred",
        other => return format!("ranking_{}.csv", other.to_ascii_lowercase()),
    };
    format!("ranking_{tag}.csv")
}

/// A run directory plus the validated settings.
pub struct Experiment {
    pub settings: Settings,
    pub out_dir: PathBuf,
}

/// Training and validation split read back from the run directory.
pub struct Split {
    pub boundary: i64,
    pub train: Dataset,
    pub valid: Dataset,
}

impl Experiment {
    pub fn new(settings: Settings, out_dir: impl Into<PathBuf>) -> Experiment {
        Experiment {
            settings,
            out_dir: out_dir.into(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn read(&self, name: &str, stage: Stage) -> Result<String> {
        let p = self.path(name);
        if !p.exists() {
            return Err(missing(&p, stage));
        }
        fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    }

    /// Runs one stage, wrapping its error with the stage name.
    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        let r = match stage {
            Stage::Generate => self.generate(),
            Stage::Bin => self.bin(),
            Stage::Select => self.select(),
            Stage::Fit => self.fit(),
            Stage::Assess => self.assess(),
            Stage::Report => self.report(),
        };
        r.map_err(|e| Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        })
    }

    /// Runs `from` and every later stage.
    pub fn run_from(&self, from: Stage) -> Result<()> {
        Stage::ALL
            .into_iter()
            .filter(|s| *s >= from)
            .try_for_each(|s| self.run_stage(s))
    }

    pub fn run(&self) -> Result<()> {
        self.run_from(Stage::Generate)
    }

    fn generate(&self) -> Result<()> {
        let s = &self.settings;
        let ds = match (&s.generator, &s.csv_path) {
            (Some(g), _) => assign_targets(&generate_portfolio(g)?, &s.target)?.dataset,
            (None, Some(p)) => {
                let raw = load_csv(p)?;
                if raw.column_of_kind(ColumnKind::Target).is_some() {
                    raw
                } else {
                    assign_targets(&raw, &s.target)?.dataset
                }
            }
            (None, None) => return Err(Error::Config("csv source needs data.csv_path".into())),
        };
        ds.require_model_schema()?;
        let boundary = match s.boundary {
            Some(b) => b,
            None => default_boundary(&ds)?,
        };
        let part = time_partition(&ds, boundary)?;
        save_csv(&ds, self.path(DATASET))?;
        self.write(PARTITION, &partition_text(&part))
    }

    /// Reads the dataset and re-applies the recorded boundary.
    pub fn load_split(&self, stage: Stage) -> Result<Split> {
        let text = self.read(PARTITION, stage)?;
        let boundary = partition_field(&text, "boundary")?;
        let p = self.path(DATASET);
        if !p.exists() {
            return Err(missing(&p, stage));
        }
        let part = time_partition(&load_csv(&p)?, boundary)?;
        let (nt, nv) = part.counts();
        if partition_field(&text, "train")? != nt as i64 || partition_field(&text, "valid")? != nv as i64 {
            return Err(Error::Schema("dataset does not match the recorded partition".into()));
        }
        Ok(Split {
            boundary,
            train: part.train,
            valid: part.valid,
        })
    }

    fn bin(&self) -> Result<()> {
        let split = self.load_split(Stage::Bin)?;
        let map = fit_binning(&split.train, &self.settings.binning)?;
        self.write(BINNING, &map.to_text())
    }

    pub fn load_binning(&self, stage: Stage) -> Result<BinningMap> {
        BinningMap::from_text(&self.read(BINNING, stage)?)
    }

    fn select(&self) -> Result<()> {
        let s = &self.settings;
        let split = self.load_split(Stage::Select)?;
        let map = self.load_binning(Stage::Select)?;
        let bt = apply_binning(&map, &split.train)?;
        let bv = apply_binning(&map, &split.valid)?;
        let pool = preselect(&map, &bt, &bv, &s.preselect)?;
        self.write(POOL, &pool.to_csv_string())?;

        let reg = if s.needs_reg_family() {
            reg_family(&pool, &map, &split.train, &bt, s)?
        } else {
            SubsetFamily::default()
        };
        let log = if s.needs_log_family() {
            log_family(&pool, &map, &bt, s)?
        } else {
            SubsetFamily::default()
        };
        self.write(SUBSETS_REG, &reg.to_csv_string())?;
        self.write(SUBSETS_LOG, &log.to_csv_string())
    }

    fn fit(&self) -> Result<()> {
        let s = &self.settings;
        let split = self.load_split(Stage::Fit)?;
        let map = self.load_binning(Stage::Fit)?;
        let reg = SubsetFamily::from_csv_str(&self.read(SUBSETS_REG, Stage::Select)?)?;
        let log = SubsetFamily::from_csv_str(&self.read(SUBSETS_LOG, Stage::Select)?)?;
        let bt = apply_binning(&map, &split.train)?;
        let bv = apply_binning(&map, &split.valid)?;
        let numeric: Vec<String> = reg
            .subsets
            .iter()
            .flat_map(|r| r.variables.iter().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let numeric: Vec<&str> = numeric.iter().map(String::as_str).collect();
        let means = TrainMeans::fit(&split.train, &numeric)?;
        let plan = plan_models(&s.techniques, &reg, &log);
        let ctx = FitContext {
            settings: s,
            map: &map,
            train: &split.train,
            valid: &split.valid,
            binned_train: &bt,
            binned_valid: &bv,
            means: &means,
        };
        let (fitted, text) = fit_plan(&ctx, &plan)?;
        self.write(FITS, &text)?;
        self.write(CRITERIA, &criteria_csv(&fitted))?;
        self.write(LEDGER, &Ledger::from_plan(&plan).to_text())
    }

    pub fn load_criteria(&self, stage: Stage) -> Result<Vec<FittedModel>> {
        parse_criteria_csv(&self.read(CRITERIA, stage)?)
    }

    fn assess(&self) -> Result<()> {
        let s = &self.settings;
        let fitted = self.load_criteria(Stage::Fit)?;
        let records: Vec<ModelRecord> = fitted.into_iter().map(|f| f.record).collect();
        if records.is_empty() {
            return Err(Error::Assess("no fitted models to assess".into()));
        }
        let mut summary_written = false;
        for profile in WeightProfile::presets() {
            let report = compare_techniques(&records, &profile, s.pool_size);
            self.write(&ranking_file(&profile), &report.ranking_csv())?;
            if !summary_written {
                self.write(CRITERIA_SUMMARY, &report.criteria_csv())?;
                summary_written = true;
            }
        }
        let nbm = Technique::Adjusted(AdjustmentMethod::parse("NBM").expect("NBM is a method"));
        let of = |t: Technique| records.iter().filter(|r| r.technique == t).cloned().collect::<Vec<_>>();
        let (log, nbm) = (of(Technique::Log), of(nbm));
        for name in [SCATTER_CSV, SCATTER_SVG] {
            let p = self.path(name);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        if !log.is_empty() && !nbm.is_empty() {
            let h = head_to_head(&log, &nbm)?;
            self.write(SCATTER_CSV, &h.to_csv_string())?;
            if s.svg {
                self.write(SCATTER_SVG, &h.to_svg())?;
            }
        }
        Ok(())
    }

    /// Regenerates the assessment files from the stored criteria, then
    /// writes the text summary.
    fn report(&self) -> Result<()> {
        self.assess()?;
        let text = self.report_text()?;
        self.write(REPORT, &text)
    }

    /// The plain-text summary of a finished run, built from its artifacts.
    pub fn report_text(&self) -> Result<String> {
        let s = &self.settings;
        let partition = self.read(PARTITION, Stage::Generate)?;
        let pool = self.read(POOL, Stage::Select)?;
        let ledger = self.read(LEDGER, Stage::Fit)?;
        let fitted = self.load_criteria(Stage::Fit)?;
        let records: Vec<ModelRecord> = fitted.iter().map(|f| f.record.clone()).collect();

        let mut out = String::from("scorecard technique comparison\n\n");
        let _ = writeln!(out, "data");
        for line in partition.lines() {
            let _ = writeln!(out, "  {line}");
        }
        let n_pool = pool.lines().skip(1).filter(|l| l.ends_with(",true")).count();
        let _ = writeln!(out, "  candidate pool: {n_pool} variables");
        let _ = writeln!(out, "\nmodels");
        for (k, v) in Ledger::rows(&ledger) {
            let _ = writeln!(out, "  {k:<12} {v}");
        }
        let n_unconverged = fitted.iter().filter(|f| !f.converged).count();
        let _ = writeln!(out, "  not converged: {n_unconverged}");

        for profile in WeightProfile::presets() {
            let report = compare_techniques(&records, &profile, s.pool_size);
            write_ranking(&mut out, &report);
        }

        let scatter = self.path(SCATTER_CSV);
        if scatter.exists() {
            let nbm = Technique::Adjusted(AdjustmentMethod::parse("NBM").expect("NBM is a method"));
            let of = |t: Technique| records.iter().filter(|r| r.technique == t).cloned().collect::<Vec<_>>();
            let h = head_to_head(&of(Technique::Log), &of(nbm))?;
            let _ = writeln!(out, "\nLOG versus NBM (medians)");
            let _ = writeln!(
                out,
                "  LOG  ar_valid {:.4}  |ar_diff| {:.4}",
                h.log_median_ar_valid, h.log_median_abs_diff
            );
            let _ = writeln!(
                out,
                "  NBM  ar_valid {:.4}  |ar_diff| {:.4}",
                h.nbm_median_ar_valid, h.nbm_median_abs_diff
            );
            let _ = writeln!(
                out,
                "  LOG more stable: {}  LOG less predictive: {}",
                h.log_more_stable(),
                h.log_less_predictive()
            );
        }
        Ok(out)
    }
}

fn write_ranking(out: &mut String, report: &RankingReport) {
    let _ = writeln!(out, "\nranking, profile {}", report.profile.name);
    for r in &report.ranking {
        let _ = writeln!(
            out,
            "  {:>2}. {:<4} median distance {:.4} (n={})",
            r.rank, r.technique, r.distance.median, r.distance.n
        );
    }
    if !report.degenerate_criteria.is_empty() {
        let _ = writeln!(out, "  constant criteria: {}", report.degenerate_criteria.join(", "));
    }
}

fn missing(path: &Path, stage: Stage) -> Error {
    let upstream = match path.file_name().and_then(|f| f.to_str()) {
        Some(DATASET | PARTITION) => Stage::Generate,
        Some(BINNING) => Stage::Bin,
        Some(POOL | SUBSETS_REG | SUBSETS_LOG) => Stage::Select,
        Some(CRITERIA | FITS | LEDGER) => Stage::Fit,
        _ => stage,
    };
    Error::MissingArtifact {
        path: path.display().to_string(),
        stage: upstream.name(),
    }
}

fn partition_text(part: &TimePartition) -> String {
    let (nt, nv) = part.counts();
    format!("boundary {}\ntrain {nt}\nvalid {nv}\n", part.boundary)
}

fn partition_field(text: &str, key: &str) -> Result<i64> {
    text.lines()
        .enumerate()
        .find_map(|(i, l)| {
            let (k, v) = l.split_once(' ')?;
            (k == key).then(|| {
                v.trim().parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("bad {key}"),
                })
            })
        })
        .unwrap_or_else(|| Err(Error::Schema(format!("partition file lacks {key}"))))
}

fn reg_family(
    pool: &CandidatePool,
    map: &BinningMap,
    train: &Dataset,
    binned: &BinnedData,
    s: &Settings,
) -> Result<SubsetFamily> {
    let names: Vec<String> = pool
        .names()
        .into_iter()
        .filter(|n| map.variable(n).is_some_and(|v| !v.is_categorical()))
        .collect();
    if names.is_empty() {
        return Ok(SubsetFamily::default());
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let means = TrainMeans::fit(train, &refs)?;
    let design = encode_reg(train, &refs, &means)?;
    let columns: Vec<Vec<f64>> = (1..design.n_cols()).map(|j| design.column(j)).collect();
    best_subsets(&names, &columns, &binned.targets, &s.subsets)
}

fn log_family(pool: &CandidatePool, map: &BinningMap, binned: &BinnedData, s: &Settings) -> Result<SubsetFamily> {
    let names = pool.names();
    let mut columns = Vec::with_capacity(names.len());
    for n in &names {
        let var = map
            .variable(n)
            .ok_or_else(|| Error::Subsets(format!("{n} absent from binning map")))?;
        let i = binned
            .index_of(n)
            .ok_or_else(|| Error::Subsets(format!("{n} not binned")))?;
        let values = match s.log_transform {
            crate::coding::LogTransform::Logit => var.logits(map.params.smoothing),
            crate::coding::LogTransform::Woe => var.woe(map.params.smoothing),
        };
        columns.push(binned.attributes[i].iter().map(|&a| values[a as usize]).collect());
    }
    best_subsets(&names, &columns, &binned.targets, &s.subsets)
}
