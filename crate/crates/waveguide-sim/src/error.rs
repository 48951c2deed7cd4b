//! Error type shared by all modules. Variants map one-to-one onto the CLI's
//! category-coded exit codes.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Malformed or inconsistent configuration (bad JSON, conflicting fields,
    /// invalid override path, out-of-range solver settings).
    #[error("config error: {0}")]
    Config(String),

    /// Physically invalid geometry: atom outside the cross section, no
    /// propagating mode at the working frequency, resonance outside the
    /// discretization window.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Numerical-domain failure: time grid beyond the revival horizon,
    /// non-positive-semidefinite decay matrix, non-commensurate delays,
    /// non-finite state.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Geometry(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
