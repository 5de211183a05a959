use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("id {id} out of range for table with {rows} rows")]
    OutOfRange { id: u64, rows: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("compression ratio undefined for a zero-byte footprint")]
    UndefinedRatio,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no execution paths available")]
    NoPaths,

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
