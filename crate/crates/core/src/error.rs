use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid species: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Thermal population beyond the requested truncation is not negligible.
    #[error("J truncation {jmax} too small for thermal ensemble (tail weight {tail:.3e}); use jmax >= {suggested}")]
    JmaxTooSmall { jmax: u32, tail: f64, suggested: u32 },

    #[error("no periodic comb found: {0}")]
    NoCombFound(String),

    #[error("isotopologue peaks unresolved at revival order {order}: {reason}")]
    Unresolved { order: f64, reason: String },

    #[error("no optimum: {0}")]
    NoOptimum(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Stable machine-readable code used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Numerical(_) => "numerical_failure",
            Error::JmaxTooSmall { .. } => "jmax_too_small",
            Error::NoCombFound(_) => "no_comb_found",
            Error::Unresolved { .. } => "unresolved",
            Error::NoOptimum(_) => "no_optimum",
            Error::Parse { .. } => "config_parse",
            Error::Io(_) => "io",
        }
    }
}
