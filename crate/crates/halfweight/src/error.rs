use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("evaluation height {height:.3e} too small for {n_max} stored terms (achievable tolerance {achievable:.3e})")]
    HeightBudget {
        height: f64,
        n_max: usize,
        achievable: f64,
    },

    #[error("aliasing budget violated: estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Aliasing { estimate: f64, tolerance: f64 },

    #[error("coefficient table too short: have {have}, need n_max >= {need}")]
    TableTooShort { have: usize, need: usize },

    #[error("pole of the gamma factor at s = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("cusp space of weight {ell}+1/2 is zero")]
    ZeroSpace { ell: u32 },

    #[error("eigenspace decomposition failed: {0}")]
    Eigen(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
