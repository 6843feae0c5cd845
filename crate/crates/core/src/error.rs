use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported grid size {0}: only even sizes are supported")]
    UnsupportedSize(usize),

    #[error("index ({u}, {v}) out of range for a {n}x{n} grid")]
    Index { u: usize, v: usize, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pattern kind mismatch: expected {expected}, found {found}")]
    Kind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined value: {0}")]
    Undefined(&'static str),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Usage-class errors map to exit code 1 on the command line; everything
    /// else is numerical/domain (2).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
