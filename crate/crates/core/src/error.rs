use thiserror::Error;

/// Errors raised by shape construction and the numerical routines.
///
/// Variants fall into two groups: [`Error::is_validation`] is true for bad
/// input (the caller can fix it), false for numerical failures such as an
/// unattainable tail budget.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape is empty: {0}")]
    EmptyShape(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not supported here (masks and windows need N in 1..=3)")]
    UnsupportedDimension(usize),

    #[error("non-finite coordinate: {0}")]
    NonFinite(String),

    #[error("point {coords:?} lies outside the window")]
    OutsideWindow { coords: Vec<f64> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("profile rejected, {integral} diverges: {reason}")]
    ProfileRejected { integral: String, reason: String },

    #[error("window needs {required} cells, above the cap of {cap}")]
    WindowTooLarge { required: u128, cap: usize },

    #[error("complement of the mask is empty inside the window")]
    ComplementEmpty,

    #[error("boundary is not strictly convex: curvature {curvature:e} at sample {index}")]
    NotConvex { index: usize, curvature: f64 },

    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::WindowTooLarge { .. } | Error::Numerical(_))
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
