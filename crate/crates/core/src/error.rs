use thiserror::Error;

/// Errors raised by the fitting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty series: nothing to fit")]
    EmptySeries,
    #[error("times and responses differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("duplicate time {time} at index {index}")]
    DuplicateTime { index: usize, time: f64 },
    #[error("times not increasing at index {index} ({time} after {previous})")]
    NotIncreasing { index: usize, time: f64, previous: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported order (m = {m}, n = {n}); the state-space path requires m = 2, n = 1")]
    UnsupportedOrder { m: usize, n: usize },
    #[error("{points} points exceed the dense-solve cap of {cap}")]
    DenseCapExceeded { points: usize, cap: usize },
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("innovation variance {value} at knot {knot} is not positive (ill-conditioned model)")]
    Conditioning { knot: usize, value: f64 },
    #[error("sampler failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("fixture parse error on line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("unknown benchmark function `{0}`")]
    UnknownFunction(String),
}

impl Error {
    /// True for failures caused by the input data or configuration rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::EmptySeries
                | Error::LengthMismatch { .. }
                | Error::NonFinite { .. }
                | Error::DuplicateTime { .. }
                | Error::NotIncreasing { .. }
                | Error::InvalidParameter(_)
                | Error::UnsupportedOrder { .. }
                | Error::DenseCapExceeded { .. }
                | Error::UnknownFunction(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
