use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid game parameters: {0}")]
    InvalidParams(String),

    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("negative density {value} at x = {x}")]
    InvalidDensity { x: f64, value: f64 },

    #[error("invalid benefit function: {0}")]
    InvalidBenefit(String),

    #[error("operation undefined for a noiseless channel (sigma_z_sq = 0)")]
    NoiselessDegenerate,

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
