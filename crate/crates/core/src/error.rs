use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical kernels, the problem generators and the runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: non-positive pivot at index {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: relative defect {defect:e}")]
    NotHermitian { defect: f64 },

    #[error("{operation} did not converge on a {dim}x{dim} matrix")]
    NoConvergence { operation: &'static str, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("form matrices carry no perturbation block")]
    MissingPerturbation,

    #[error("columns are numerically dependent (column {column})")]
    RankDeficient { column: usize },

    #[error("levels are not nested: {0}")]
    NotNested(String),

    #[error("shift gamma = {gamma} does not lie below the spectrum: shifted form is not positive definite")]
    ShiftNotBelowSpectrum { gamma: f64 },

    #[error("target disks overlap: targets {first} and {second} are closer than twice the radius {radius}")]
    OverlappingTargets {
        first: f64,
        second: f64,
        radius: f64,
    },

    #[error("imaginary part {im} lies outside the numerical range [0, 1]")]
    OutsideNumericalRange { im: f64 },

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Format(_)
                | Error::Io { .. }
                | Error::InvalidParameter(_)
                | Error::NotNested(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
