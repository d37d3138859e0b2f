use thiserror::Error;

use crate::types::Label;

#[derive(Debug, Error)]
pub enum Error {
    #[error("factor index {index} is out of range for {n} factors")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("minor allele frequency {0} is outside (0, 0.5]")]
    InvalidMaf(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class {label} has {size} observations, fewer than the {folds} folds requested")]
    ClassTooSmall { label: Label, size: usize, folds: usize },

    #[error("draw cap of {cap} raw observations exceeded before the strata were filled")]
    DrawBudgetExceeded { cap: u64 },

    #[error("no stratified sample size in 1..={budget} fits the budget with the requested confidence")]
    NoFeasibleSize { budget: u64 },

    #[error("exact evaluation over {coords} coordinates exceeds the limit of {limit}")]
    StateSpaceTooLarge { coords: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
