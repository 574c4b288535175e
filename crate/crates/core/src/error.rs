use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The dipole model is undefined at (or numerically near) its source.
    #[error("position {norm:e} m from the dipole source is below the singularity tolerance")]
    DegeneratePosition { norm: f64 },

    #[error("control input magnitude {norm:e} rad/s is too small to define a heading")]
    ZeroInput { norm: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("projection onto the path is ill-defined at this point: {0}")]
    IllDefinedProjection(String),

    #[error("ambiguous projection: {count} equally near path points and no continuity hint")]
    AmbiguousProjection { count: usize },

    #[error("path parameter {tau} outside the domain [{min}, {max}]")]
    OutOfDomain { tau: f64, min: f64, max: f64 },

    #[error("{what} is not symmetric positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("root finding failed: {0}")]
    NoRoot(String),

    #[error("singular linear system: {0}")]
    Singular(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and >= 0, got {value}"),
        })
    }
}
