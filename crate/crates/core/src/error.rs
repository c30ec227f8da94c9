use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular design: pivot {pivot:e} below tolerance relative to largest pivot {largest:e}")]
    SingularDesign { pivot: f64, largest: f64 },

    #[error("insufficient rows: need n >= 2p, got n = {n}, p = {p}")]
    InsufficientRows { n: usize, p: usize },

    #[error("matrix is not positive semidefinite: eigenvalue {0:e}")]
    NotPsd(f64),

    #[error("column {0} has zero norm")]
    DegenerateFeature(usize),

    #[error("lasso did not converge after {sweeps} sweeps (last change {change:e})")]
    Convergence { sweeps: usize, change: f64 },

    #[error("invalid confidence function: {0}")]
    InvalidConfidence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("length error: needed {needed} bytes, got {got}")]
    Length { needed: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
