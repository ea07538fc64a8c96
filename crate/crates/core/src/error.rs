use thiserror::Error;

/// Errors raised by the transducer toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown symbol `{symbol}` in alphabet `{alphabet}`")]
    UnknownSymbol { alphabet: String, symbol: String },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("invalid transducer: {0}")]
    InvalidTransducer(String),

    #[error("kernel family is empty")]
    EmptyKernelList,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("horizon {horizon} is outside the supported range 1..={max}")]
    Horizon { horizon: usize, max: usize },

    #[error("conditioning value has zero probability")]
    ZeroProbability,

    #[error("unknown process `{0}`")]
    UnknownProcess(String),

    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("variable set `{0}` must be nonempty")]
    EmptySet(&'static str),

    #[error("process sets overlap on `{0}`")]
    Overlap(String),

    #[error("role mismatch: {0}")]
    RoleMismatch(String),

    #[error("invalid cut: {0}")]
    InvalidCut(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("size guard exceeded: {0}")]
    Guard(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
