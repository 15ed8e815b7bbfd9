use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon `{name}`: {reason}")]
    InvalidPolygon { name: String, reason: String },
    #[error("no nodes generated")]
    NoNodes,
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("undefined vertical axis: gravity vector has zero norm")]
    UndefinedVerticalAxis,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("underdetermined fit")]
    UnderdeterminedFit,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("unknown anchor `{0}`")]
    UnknownAnchor(String),
    #[error("position ({x}, {y}) lies in a restricted area")]
    RestrictedArea { x: f64, y: f64 },
    #[error("rooms not covered by survey spec: {0:?}")]
    UncoveredRooms(Vec<String>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
