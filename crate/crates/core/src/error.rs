use thiserror::Error;

use crate::model::BareLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid device parameters: {0}")]
    InvalidDevice(String),

    #[error("label |{0}> is outside the truncated space")]
    LabelOutOfRange(BareLabel),

    #[error("pulse configuration error: {0}")]
    Pulse(String),

    #[error("integration error: {0}")]
    Integration(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigenstate labeling is ambiguous for {0:?}")]
    AmbiguousLabel(Vec<BareLabel>),

    #[error("perturbative expression is singular: {factor} = {value_mhz:.6} MHz")]
    Singular { factor: &'static str, value_mhz: f64 },

    #[error("optimization problem is invalid: {0}")]
    Problem(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
