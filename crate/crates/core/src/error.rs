use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("integration diverged at t = {time} (|y| = {norm:e})")]
    Divergence { time: f64, norm: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("oracle capacity exceeded: {0}")]
    OracleCapacity(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse(_) => 2,
            Error::NonConvergence(_) | Error::Divergence { .. } => 3,
            Error::Capability(_) | Error::OracleCapacity(_) => 4,
            _ => 1,
        }
    }
}
