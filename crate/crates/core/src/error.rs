use thiserror::Error;

/// A type invariant that does not hold. `field` names the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{field}`: {reason}")]
pub struct ValidationError {
    pub field: String,
    pub reason: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Top-level error for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("failed to parse scenario `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Curve(#[from] crate::curve::CurveError),

    #[error(transparent)]
    Dock(#[from] crate::docksim::DockError),

    #[error(transparent)]
    Hull(#[from] crate::hull::HullError),

    #[error(transparent)]
    Optimize(#[from] crate::optimize::OptimizeError),

    #[error(transparent)]
    Coverage(#[from] crate::coverage::CoverageError),

    #[error(transparent)]
    Thermal(#[from] crate::thermal::ThermalError),

    #[error(transparent)]
    Fleet(#[from] crate::fleetsim::FleetError),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Parse { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
