use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),
    #[error("modulation makes the stay probability of row {row} ({label}) negative: {stay}")]
    NegativeStay { row: usize, label: String, stay: f64 },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("target horizon of {horizon} months exceeds the available history for every row")]
    HorizonTooLong { horizon: u32 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("all rows fall on one side of partition boundary {boundary}")]
    OneSidedPartition { boundary: i64 },

    #[error("binning error: {0}")]
    Binning(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("coding error: {0}")]
    Coding(String),
    #[error("variable {0} has no non-missing training values")]
    AllMissing(String),

    #[error("information matrix is singular; dependent columns: {}", columns.join(", "))]
    Singular { columns: Vec<String> },
    #[error("model fitting error: {0}")]
    Fit(String),

    #[error("metric error: {0}")]
    Metric(String),
    #[error("candidate pool is empty after pre-selection (min_gini={min_gini}, max_instability={max_instability}); relax the thresholds")]
    EmptyPool { min_gini: f64, max_instability: f64 },
    #[error("subset search error: {0}")]
    Subsets(String),

    #[error("assessment error: {0}")]
    Assess(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing artifact {path}; run `{stage}` first")]
    MissingArtifact { path: String, stage: &'static str },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
