//! Synthetic consumer-finance portfolios.
//!
//! Accounts migrate monthly between delinquency buckets according to a
//! Markov kernel whose worsening mass follows a sinusoidal macro driver.
//! Within each bucket, worsening moves are tilted towards the accounts with
//! the lowest latent score, so application and behavioural characteristics
//! carry signal about future default.

mod matrix;
mod simulate;
mod targets;

pub use matrix::{modulated_matrix, scale_worsening, Bucket, TransitionMatrix};
pub use simulate::{
    account_rng, generate_portfolio, step_account, Account, BEHAVIOURAL_VARIABLES,
};
pub use targets::{assign_targets, TargetOutcome, TargetSpec};

use crate::error::{Error, Result};

/// `amplitude * sin(2π t / period + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroCycle {
    pub amplitude: f64,
    pub period_months: u32,
    pub phase: f64,
}

impl MacroCycle {
    pub fn new(amplitude: f64, period_months: u32, phase: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::InvalidConfig(format!("macro amplitude {amplitude} not in [0,1)")));
        }
        if period_months == 0 {
            return Err(Error::InvalidConfig("macro period must be positive".into()));
        }
        Ok(MacroCycle {
            amplitude,
            period_months,
            phase,
        })
    }

    pub fn value(&self, month: i64) -> f64 {
        let angle =
            2.0 * std::f64::consts::PI * (month as f64) / f64::from(self.period_months) + self.phase;
        self.amplitude * angle.sin()
    }
}

impl Default for MacroCycle {
    fn default() -> Self {
        MacroCycle {
            amplitude: 0.3,
            period_months: 24,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskLevel {
    Small,
    Medium,
    Large,
}

impl RiskLevel {
    /// Multiplier applied to the worsening mass of the base kernel.
    pub fn factor(self) -> f64 {
        match self {
            RiskLevel::Small => 0.5,
            RiskLevel::Medium => 1.0,
            RiskLevel::Large => 2.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "small" => Some(RiskLevel::Small),
            "medium" => Some(RiskLevel::Medium),
            "large" => Some(RiskLevel::Large),
            _ => None,
        }
    }
}

/// Portfolio size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizePreset {
    /// A few thousand rows, for smoke tests.
    Tiny,
    /// Reduced experiment scale.
    Desk,
    /// About 100k account-months over four macro cycles.
    Default,
    /// Roughly 2.7M rows × 56 columns.
    Full,
}

impl SizePreset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tiny" => Some(SizePreset::Tiny),
            "desk" => Some(SizePreset::Desk),
            "default" => Some(SizePreset::Default),
            "full" => Some(SizePreset::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// `YYYYMM` of the first emitted month.
    pub start_period: i64,
    /// Emitted months.
    pub months: u32,
    /// Months simulated before the first emitted month so the book is seasoned.
    pub burn_in_months: u32,
    pub new_accounts_per_month: u32,
    /// Medium-risk kernel; `risk_level` rescales its worsening mass.
    pub base_matrix: TransitionMatrix,
    pub macro_cycle: MacroCycle,
    pub macro_sensitivity: f64,
    /// Strength of the score-rank tilt of worsening moves, in [0,1].
    pub score_tilt: f64,
    pub n_app_variables: usize,
    pub n_informative_variables: usize,
    pub n_noise_variables: usize,
    pub risk_level: RiskLevel,
}

impl GeneratorConfig {
    pub fn preset(size: SizePreset, risk: RiskLevel, seed: u64) -> Self {
        let (months, burn_in, new, app, informative, noise) = match size {
            SizePreset::Tiny => (12, 0, 50, 0, 6, 2),
            SizePreset::Desk => (30, 12, 60, 2, 12, 4),
            SizePreset::Default => (48, 12, 60, 2, 20, 8),
            SizePreset::Full => (60, 12, 1056, 2, 20, 25),
        };
        GeneratorConfig {
            seed,
            start_period: 200501,
            months,
            burn_in_months: burn_in,
            new_accounts_per_month: new,
            base_matrix: TransitionMatrix::consumer_finance(),
            macro_cycle: MacroCycle::default(),
            macro_sensitivity: 1.0,
            score_tilt: 0.9,
            n_app_variables: app,
            n_informative_variables: informative,
            n_noise_variables: noise,
            risk_level: risk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.months < 7 {
            return Err(Error::InvalidConfig(format!(
                "months = {} but a 6-month target window needs at least 7",
                self.months
            )));
        }
        if self.new_accounts_per_month == 0 {
            return Err(Error::InvalidConfig("new_accounts_per_month must be positive".into()));
        }
        if self.n_informative_variables == 0
            || self.n_informative_variables > BEHAVIOURAL_VARIABLES.len()
        {
            return Err(Error::InvalidConfig(format!(
                "n_informative_variables must be in 1..={}",
                BEHAVIOURAL_VARIABLES.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.score_tilt) {
            return Err(Error::InvalidConfig("score_tilt must be in [0,1]".into()));
        }
        if !(self.macro_sensitivity >= 0.0) {
            return Err(Error::InvalidConfig("macro_sensitivity must be ≥ 0".into()));
        }
        MacroCycle::new(
            self.macro_cycle.amplitude,
            self.macro_cycle.period_months,
            self.macro_cycle.phase,
        )?;
        Ok(())
    }

    /// Kernel after the risk-level rescaling.
    pub fn risk_matrix(&self) -> Result<TransitionMatrix> {
        scale_worsening(&self.base_matrix, self.risk_level.factor())
    }
}
