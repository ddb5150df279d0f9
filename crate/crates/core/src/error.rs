use thiserror::Error;

/// Errors raised by configuration validation and the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("M = {m} is not divisible by N_RF = {n_rf}")]
    NotDivisible { m: usize, n_rf: usize },

    #[error("operation requires N_RF = K, got N_RF = {n_rf}, K = {k}")]
    RfChainMismatch { n_rf: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero-forcing Gram matrix is singular (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("thresholds undefined for a single user")]
    SingleUser,
}

pub type Result<T> = std::result::Result<T, Error>;
