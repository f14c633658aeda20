use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum PsseError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("branch {branch} references unknown bus {bus}")]
    DanglingEndpoint { branch: usize, bus: i64 },

    #[error("branch {branch} has zero series impedance")]
    ZeroImpedance { branch: usize },

    #[error("branch {branch} connects bus {bus} to itself")]
    SelfLoop { branch: usize, bus: i64 },

    #[error("case has no reference bus")]
    NoReferenceBus,

    #[error("case has more than one reference bus ({0} and {1})")]
    MultipleReferenceBuses(i64, i64),

    #[error("duplicate bus id {0}")]
    DuplicateBus(i64),

    #[error("invalid location {location} for {kind} measurement")]
    InvalidLocation { kind: String, location: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("cannot normalize record {0}: measurement matrix is zero")]
    ZeroMatrix(usize),

    #[error("corruption asks for {requested} records but only {eligible} are eligible")]
    TooManyCorrupted { requested: usize, eligible: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("normal matrix is singular (system not observable)")]
    Unobservable,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PsseError>;
