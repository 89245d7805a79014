use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CbsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("the trace element (0, 0) is not part of the reduced 255-element space")]
    ExcludedTraceElement,

    #[error("vector is not normalized: |n| = {norm}")]
    NonUnitVector { norm: f64 },

    #[error("singular resolvent at z = {z}")]
    Singular { z: Complex64 },

    #[error("ill-conditioned resolvent at z = {z} (condition estimate {condition:.3e})")]
    IllConditioned { z: Complex64, condition: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sum rule violated for {term}: integral {integral:.6e} vs intensity {intensity:.6e}")]
    SumRule {
        term: &'static str,
        integral: f64,
        intensity: f64,
    },

    #[error("Monte Carlo average requested with zero samples")]
    NoSamples,
}

impl CbsError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CbsError::Singular { .. }
                | CbsError::IllConditioned { .. }
                | CbsError::Numerical(_)
                | CbsError::SumRule { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, CbsError>;
