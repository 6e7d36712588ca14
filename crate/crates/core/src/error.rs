use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library.
///
/// The variants fall into three groups which the CLI maps to distinct exit
/// codes: invalid input, violated model assumptions and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate kernel: A = {a} must exceed delta^2 = {delta_sq}")]
    DegenerateKernel { a: f64, delta_sq: f64 },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error(
        "no bracket for the level equation at b = {b} on u in [{lo}, {hi}]; b is too small for the asymptotic regime"
    )]
    NoBracket { b: f64, lo: f64, hi: f64 },

    #[error("maximizer stuck at the search-interval edge ({edge}) after widening")]
    SearchEdge { edge: f64 },

    #[error("tilt level zeta = {zeta} exceeds the unbiasedness envelope zeta* = {envelope}")]
    ZetaAboveEnvelope { zeta: f64, envelope: f64 },

    #[error("no exceedances observed at b = {b} with n = {n}")]
    NoExceedance { b: f64, n: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Input and assumption errors are the caller's fault; numerical ones
    /// are not.
    pub fn is_assumption(&self) -> bool {
        matches!(self, Error::Assumption(_) | Error::DegenerateKernel { .. })
    }

    pub fn is_input(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::InvalidGrid(_) | Error::ZetaAboveEnvelope { .. })
    }
}
