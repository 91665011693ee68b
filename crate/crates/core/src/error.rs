use std::io;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, range, divisibility).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Camera or network parameters outside their admissible set.
    #[error("invalid parameters: {0}")]
    Params(String),

    /// A weight store does not match the network it is loaded into.
    #[error("weight load error: {0}")]
    Load(String),

    /// Malformed binary or text file.
    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate CWSI denominator: t_dry {t_dry} <= t_wet {t_wet}")]
    DegenerateCwsi { t_dry: f64, t_wet: f64 },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
