use thiserror::Error;

/// Errors surfaced by the toolkit. Everything user-correctable (bad config,
/// malformed data, degenerate inputs) is distinguished from internal failures
/// so the CLI can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("column `{0}` not found in input")]
    MissingColumn(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("column `{column}` row {row}: cannot parse `{value}` as a number")]
    BadNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("label column `{column}` is not binary: found {found} distinct values")]
    NonBinaryLabel { column: String, found: usize },
    #[error("cannot split: {0}")]
    BadSplit(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid instance weights: {0}")]
    BadWeights(String),
    #[error("empty sample: {0}")]
    EmptySample(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("constant input: {0}")]
    ConstantInput(String),
    #[error("not enough groups: {0}")]
    InsufficientGroups(String),
    #[error("undefined rate: {0}")]
    UndefinedRate(String),
    #[error("group missing from data: {0}")]
    MissingGroup(String),
    #[error("prediction sets are misaligned: {0}")]
    Misaligned(String),
    #[error("score file invalid: {0}")]
    ScoreFile(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("split mismatch: {0}")]
    SplitMismatch(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for failures caused by user-supplied configuration or data
    /// (CLI exit code 1), false for internal faults (exit code 2).
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
