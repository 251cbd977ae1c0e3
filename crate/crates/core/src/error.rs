use std::path::PathBuf;

use crate::matching::DisparityDomain;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} lies outside the valid domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("disparity map is {found} but this operation requires {expected}")]
    DomainTagMismatch {
        expected: DisparityDomain,
        found: DisparityDomain,
    },

    #[error(
        "triangulation needs at least 3 non-collinear target points ({0} distinct points given)"
    )]
    DegenerateTargets(usize),

    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error(
        "disparity sidecar {} is missing; regenerate the map with `fstk estimate` or `fstk render --gt-disparity`",
        .0.display()
    )]
    MissingSidecar(PathBuf),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for violations of an operation's preconditions, as opposed to
    /// unreadable or malformed inputs.
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::InvalidCamera(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch(_)
                | Error::DomainTagMismatch { .. }
                | Error::DegenerateTargets(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
