use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ingest
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("unexpected CSV header `{found}`, expected `{expected}`")]
    BadHeader { found: String, expected: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: cannot parse `{value}` as {field}")]
    BadNumber { line: usize, field: String, value: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("dates not strictly increasing at {0}")]
    Unsorted(NaiveDate),
    #[error("calendar gap: {missing} is missing")]
    Gap { missing: NaiveDate },
    #[error("{date}: invalid candle: {reason}")]
    InvalidCandle { date: NaiveDate, reason: String },

    // indicators / dataset
    #[error("invalid window length {0}")]
    InvalidWindow(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("series of {len} rows is too short: {needed} required")]
    TooShort { len: usize, needed: usize },
    #[error("split of {rows} rows at fraction {fraction} leaves an empty partition")]
    EmptySplit { rows: usize, fraction: f64 },
    #[error("feature `{0}` is constant on the training rows")]
    ConstantFeature(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    // mlr
    #[error("rank-deficient design: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("horizon {horizon}: {source}")]
    Horizon {
        horizon: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("target is constant; R^2 undefined")]
    ConstantTarget,

    // lstm
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    // phase / eval
    #[error("history is empty")]
    EmptyHistory,
    #[error("forecast anchor {anchor} does not match last history date {last}")]
    AnchorMismatch { anchor: NaiveDate, last: NaiveDate },
    #[error("no shared points to compare")]
    NoOverlap,
    #[error("reports cover different date ranges")]
    DateRangeMismatch,

    // artifacts
    #[error("{0} artifact not found")]
    ArtifactNotFound(String),
    #[error("schema version mismatch: found {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
