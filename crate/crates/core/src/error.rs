use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown distribution kind `{0}`")]
    UnknownKind(String),

    #[error("minimizer {0:?} is not inside the open cube (-1, 1)^d")]
    MinimizerOutsideCube(Vec<f64>),

    #[error("invalid grid address: {0}")]
    InvalidAddress(String),

    #[error("the root address has no parent")]
    RootHasNoParent,

    #[error("decode error: {0}")]
    Decode(String),

    #[error("root uncovered: no level-0 signal at the modal coarse point")]
    RootUncovered,

    #[error("estimator `{estimator}` is not applicable: {reason}")]
    Unsupported { estimator: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnknownKind(_) => "unknown_kind",
            Error::MinimizerOutsideCube(_) => "minimizer_outside_cube",
            Error::InvalidAddress(_) => "invalid_address",
            Error::RootHasNoParent => "root_has_no_parent",
            Error::Decode(_) => "decode",
            Error::RootUncovered => "root_uncovered",
            Error::Unsupported { .. } => "unsupported",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
