//! Credit-scoring laboratory.
//!
//! Generates synthetic consumer-finance portfolios from a macro-modulated
//! delinquency Markov chain and runs a scorecard technique comparison over
//! them: entropy binning, REG / LOG / indicator codings, logistic
//! estimation, best-subset search, attribute adjustment and distance-to-ideal
//! ranking of the resulting model families.

pub mod assess;
pub mod binning;
pub mod coding;
pub mod datagen;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod glm;
pub mod metrics;
pub mod subsets;

mod linalg;

pub use error::{Error, Result};
