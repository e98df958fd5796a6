use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("angle {0} rad is outside [-pi/2, pi/2)")]
    InvalidAngle(f64),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid with {0} points is too coarse (need at least 3)")]
    GridTooCoarse(usize),
    #[error(
        "mixture keeps only {mass:.3} of the in-domain mass its centred components would have"
    )]
    TruncationDominance { mass: f64 },
    #[error("posterior Fisher information is zero; the PCRB is infinite")]
    InfinitePcrb,
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("solver: {0}")]
    Solver(#[from] lmi_sdp::SdpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
