use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid time window: {0}")]
    InvalidWindow(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point ({lat}, {lon}) lies outside the bounding box")]
    OutOfBox { lat: f64, lon: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph has no edges (total weight is zero)")]
    EmptyGraph,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("unknown scenario {0}")]
    UnknownScenario(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
