use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular channel for beam {beam}: {reason}")]
    SingularChannel { beam: usize, reason: String },

    #[error("degenerate beam {beam}: effective channel is zero")]
    DegenerateBeam { beam: usize },

    #[error("null space of dimension {needed} does not exist for beam {beam} (available {available})")]
    Infeasible {
        beam: usize,
        needed: usize,
        available: usize,
    },

    #[error("precoder is identically zero")]
    ZeroPrecoder,

    #[error("gateway {gateway}: {source}")]
    Gateway {
        gateway: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid MODCOD table: {0}")]
    Modcod(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
