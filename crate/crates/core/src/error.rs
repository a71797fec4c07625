use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight table is empty")]
    Empty,
    #[error("weight {value} at index {index} is not a positive finite number")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weight {value} at index {index} exceeds 1 and cannot be an inclusion probability")]
    ProbabilityAboveOne { index: usize, value: f64 },
    #[error("{n} items exceed the supported maximum of {max}")]
    TooManyItems { n: usize, max: usize },
    #[error("cannot draw {k} distinct items from {n}")]
    SampleTooLarge { k: usize, n: usize },
    #[error("oversample size {ell:e} exceeds the cap of 2^40; the weights are too skewed for oversampling")]
    OversampleTooLarge { ell: f64 },
    #[error("oracle guard violated: {0}")]
    OracleGuard(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
