use thiserror::Error;

/// Error type shared by the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run or model configuration (bad dimension, mass, grids, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested level set is empty or numerically unusable.
    #[error("degenerate level set: {0}")]
    DegenerateSurface(String),

    /// The requested level is not attained by the field.
    #[error("level t = {level} not attained by the field")]
    LevelNotAttained { level: f64 },

    /// Iterative solver ran out of sweeps.
    #[error("solver did not converge: residual {residual:.3e} after {sweeps} sweeps (tolerance {tolerance:.3e})")]
    NonConvergence {
        residual: f64,
        sweeps: usize,
        tolerance: f64,
    },

    /// Numerical quadrature failed to deliver the requested accuracy.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file (config, grid dump, ...).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
