use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::assess::Technique;
use crate::binning::BinningParams;
use crate::coding::{CodingKind, LogTransform};
use crate::datagen::{GeneratorConfig, RiskLevel, SizePreset, TargetSpec};
use crate::error::{Error, Result};
use crate::glm::Thresholds;
use crate::subsets::{PreselectParams, SubsetParams};

/// Experiment configuration as read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub binning: BinningConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub assessment: AssessmentConfig,
    #[serde(default = "all_techniques")]
    pub techniques: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn all_techniques() -> Vec<String> {
    Technique::all().iter().map(Technique::label).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Generate,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub preset: String,
    pub risk: String,
    pub seed: u64,
    pub csv_path: Option<PathBuf>,
    /// Last training period (`YYYYMM`); defaults to two thirds of the periods.
    pub boundary: Option<i64>,
    pub horizon: u32,
    pub dpd_threshold: u32,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Generate,
            preset: "default".into(),
            risk: "medium".into(),
            seed: 1,
            csv_path: None,
            boundary: None,
            horizon: 6,
            dpd_threshold: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinningConfig {
    pub max_bins: usize,
    pub min_share: f64,
    pub smoothing: f64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        let p = BinningParams::default();
        BinningConfig {
            max_bins: p.max_bins,
            min_share: p.min_share,
            smoothing: p.smoothing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub min_gini: f64,
    pub max_instability: f64,
    pub sizes: Vec<usize>,
    pub top_k: usize,
    pub exhaustive_limit: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        let p = PreselectParams::default();
        let s = SubsetParams::default();
        SelectionConfig {
            min_gini: p.min_gini,
            max_instability: p.max_instability,
            sizes: s.sizes,
            top_k: s.top_k,
            exhaustive_limit: s.exhaustive_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub entry_p: f64,
    pub stay_p: f64,
    /// `logit` or `woe`.
    pub log_transform: String,
    /// Indicator coding of the plain GRP models.
    pub grp_coding: String,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            entry_p: 0.05,
            stay_p: 0.05,
            log_transform: "logit".into(),
            grp_coding: "DUMMY".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssessmentConfig {
    /// Best models per technique entering the comparison.
    pub pool_size: usize,
    pub svg: bool,
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        AssessmentConfig {
            pool_size: 700,
            svg: true,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig::default(),
            binning: BinningConfig::default(),
            selection: SelectionConfig::default(),
            estimation: EstimationConfig::default(),
            assessment: AssessmentConfig::default(),
            techniques: all_techniques(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative CSV paths are relative to the config file
        if let (Some(csv), Some(dir)) = (&cfg.data.csv_path, path.parent()) {
            if csv.is_relative() {
                cfg.data.csv_path = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    /// Desk-scale preset: small portfolio, sizes 3 to 5, ten models per size.
    pub fn desk_scale(mut self) -> Self {
        self.data.preset = "desk".into();
        self.selection.sizes = vec![3, 4, 5];
        self.selection.top_k = 10;
        self
    }

    pub fn desk() -> Self {
        Self::default().desk_scale()
    }

    pub fn settings(&self) -> Result<Settings> {
        let bad = |m: String| Error::Config(m);
        let mut techniques = Vec::new();
        for t in &self.techniques {
            let t = Technique::parse(t).ok_or_else(|| bad(format!("unknown technique {t}")))?;
            if !techniques.contains(&t) {
                techniques.push(t);
            }
        }
        if techniques.is_empty() {
            return Err(bad("no techniques selected".into()));
        }
        techniques.sort();
        let generator = match self.data.source {
            DataSource::Generate => {
                let size = SizePreset::parse(&self.data.preset)
                    .ok_or_else(|| bad(format!("unknown preset {}", self.data.preset)))?;
                let risk = RiskLevel::parse(&self.data.risk)
                    .ok_or_else(|| bad(format!("unknown risk level {}", self.data.risk)))?;
                let g = GeneratorConfig::preset(size, risk, self.data.seed);
                g.validate()?;
                Some(g)
            }
            DataSource::Csv => {
                if self.data.csv_path.is_none() {
                    return Err(bad("data.source = \"csv\" needs data.csv_path".into()));
                }
                None
            }
        };
        if self.selection.sizes.is_empty() || self.selection.sizes.contains(&0) {
            return Err(bad("selection.sizes must be non-empty positive sizes".into()));
        }
        if self.selection.top_k == 0 {
            return Err(bad("selection.top_k must be positive".into()));
        }
        let b = &self.binning;
        if b.max_bins < 1 || !(0.0..0.5).contains(&b.min_share) || !(b.smoothing > 0.0) {
            return Err(bad("binning needs max_bins >= 1, 0 <= min_share < 0.5, smoothing > 0".into()));
        }
        let e = &self.estimation;
        for (k, v) in [("entry_p", e.entry_p), ("stay_p", e.stay_p)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("estimation.{k} must lie in [0, 1]")));
            }
        }
        let log_transform = match e.log_transform.to_ascii_lowercase().as_str() {
            "logit" => LogTransform::Logit,
            "woe" => LogTransform::Woe,
            other => return Err(bad(format!("unknown log_transform {other}"))),
        };
        let grp_coding = CodingKind::parse(&e.grp_coding)
            .filter(|k| k.is_indicator())
            .ok_or_else(|| bad(format!("grp_coding {} is not an indicator coding", e.grp_coding)))?;
        if self.assessment.pool_size == 0 {
            return Err(bad("assessment.pool_size must be positive".into()));
        }
        Ok(Settings {
            generator,
            csv_path: self.data.csv_path.clone(),
            target: TargetSpec {
                horizon: self.data.horizon,
                dpd_threshold: self.data.dpd_threshold,
                ..TargetSpec::default()
            },
            boundary: self.data.boundary,
            binning: BinningParams {
                max_bins: b.max_bins,
                min_share: b.min_share,
                smoothing: b.smoothing,
            },
            preselect: PreselectParams {
                min_gini: self.selection.min_gini,
                max_instability: self.selection.max_instability,
            },
            subsets: SubsetParams {
                sizes: self.selection.sizes.clone(),
                top_k: self.selection.top_k,
                exhaustive_limit: self.selection.exhaustive_limit,
            },
            thresholds: Thresholds {
                entry_p: e.entry_p,
                stay_p: e.stay_p,
            },
            log_transform,
            grp_coding,
            pool_size: self.assessment.pool_size,
            svg: self.assessment.svg,
            techniques,
        })
    }
}

/// Validated, typed view of an [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// `None` when the data come from a CSV file.
    pub generator: Option<GeneratorConfig>,
    pub csv_path: Option<PathBuf>,
    pub target: TargetSpec,
    pub boundary: Option<i64>,
    pub binning: BinningParams,
    pub preselect: PreselectParams,
    pub subsets: SubsetParams,
    pub thresholds: Thresholds,
    pub log_transform: LogTransform,
    pub grp_coding: CodingKind,
    pub pool_size: usize,
    pub svg: bool,
    /// Sorted, deduplicated.
    pub techniques: Vec<Technique>,
}

impl Settings {
    pub fn runs(&self, t: Technique) -> bool {
        self.techniques.contains(&t)
    }

    /// Techniques built on the GRP union of both families.
    pub fn needs_union(&self) -> bool {
        self.techniques
            .iter()
            .any(|t| matches!(t, Technique::Grp | Technique::Adjusted(_)))
    }

    pub fn needs_reg_family(&self) -> bool {
        self.runs(Technique::Reg) || self.needs_union()
    }

    pub fn needs_log_family(&self) -> bool {
        self.runs(Technique::Log) || self.needs_union()
    }
}
