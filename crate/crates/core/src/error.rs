use std::io;

/// Errors raised by the laboratory.
///
/// Variants are coarse on purpose: callers (the CLI in particular) map them
/// onto exit codes, so each variant corresponds to one failure class.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid degree {degree}: {reason}")]
    InvalidDegree { degree: i64, reason: &'static str },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("argument outside its domain: {0}")]
    Domain(String),

    #[error("numerical accuracy not reached in {what} (residual {residual:.3e})")]
    Accuracy { what: &'static str, residual: f64 },

    #[error("root bracket invalid: {0}")]
    Bracket(String),

    #[error("resource cap exceeded: {0}")]
    Resource(String),

    #[error("incompatible disorder tensors: {0}")]
    Incompatible(String),

    #[error("malformed binary file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by a configured size cap rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
