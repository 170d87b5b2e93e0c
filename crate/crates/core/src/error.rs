use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough eligible DFT columns for the requested number of sequences.
    #[error(
        "pilot capacity exceeded: DFT size {size} offers {available} conjugate-free columns \
         but {requested} are needed (requires N >= 2*{requested}+2 = {})",
        2 * requested + 2
    )]
    Capacity {
        size: usize,
        requested: usize,
        available: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("Fisher information is singular; deficient parameter block: {block}")]
    SingularFisher { block: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Capacity { .. } | Error::Unsupported(_) => true,
            Error::Trial { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
