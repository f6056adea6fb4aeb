use thiserror::Error;

/// Failures raised by the dissipation routes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |O - O^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("time grid too short: |q| at the {edge} is {ratio:e} of max |q| (limit {limit:e})")]
    GridTooShort {
        edge: &'static str,
        ratio: f64,
        limit: f64,
    },

    #[error("norm drift {drift:e} exceeds limit {limit:e} at t = {time}")]
    NormDrift { drift: f64, limit: f64, time: f64 },

    #[error("truncation n_max = {n_max} insufficient: {detail}")]
    Truncation { n_max: usize, detail: String },

    #[error("internal consistency check `{check}` failed: gap {gap:e} > {limit:e}")]
    Consistency {
        check: &'static str,
        gap: f64,
        limit: f64,
    },

    #[error("malformed tabulated signal at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
