use thiserror::Error;

pub type Result<T> = std::result::Result<T, SageError>;

#[derive(Debug, Error)]
pub enum SageError {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coefficient {0}")]
    NonFinite(f64),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("group too large to enumerate (limit {limit} elements)")]
    GroupTooLarge { limit: usize },

    #[error("orbit of size {size} exceeds the materialization budget of {limit}")]
    OrbitTooLarge { size: String, limit: usize },

    #[error("set is not closed under the group action: {0}")]
    NotClosed(String),

    #[error("signomial is not invariant under the group")]
    NotInvariant,

    #[error("coefficient is not constant on the orbit of {0}")]
    NotOrbitConstant(String),

    #[error("negative terms present but no positive terms to certify them")]
    EmptyInner,

    #[error("combinatorial count {0} exceeds 2^53 and cannot be represented exactly as f64")]
    CountOverflow(String),

    #[error("invalid support set: {0}")]
    InvalidSupport(String),

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
