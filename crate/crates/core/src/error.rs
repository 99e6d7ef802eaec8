use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exponential out of range: |U| = {0} exceeds 700")]
    Overflow(f64),
    #[error("outside energy shell: {0}")]
    OutsideEnergyShell(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("stationary points do not match the reference table: {0}")]
    ReferenceMismatch(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed file at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidParameter(_) | Error::Format { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
