use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear solver failed ({context}): {detail}")]
    Solver { context: String, detail: String },

    #[error("volume constraint unreachable: target {target:.6e}, achievable {achieved:.6e}")]
    Bisection { target: f64, achieved: f64 },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
