use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system size {n}: at least {min} qubits are required")]
    InvalidSize { n: usize, min: usize },

    #[error("bond {bond} out of range for a chain of {n} qubits (valid bonds 0..={max})", max = n.saturating_sub(2))]
    BondOutOfRange { bond: usize, n: usize },

    #[error("invalid stabilizer state: {0}")]
    InvalidState(String),

    #[error("clipped-gauge consistency violated: {0}")]
    Gauge(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
