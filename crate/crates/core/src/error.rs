use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidOffspringLaw(String),

    #[error("invalid environment law: {0}")]
    InvalidEnvironment(String),

    #[error(
        "unbalanced kernel: deme {deme} has inflow sum {row_sum} and outflow sum {col_sum}, \
         expected both equal to mu = {mu} (tolerance {tol})"
    )]
    UnbalancedKernel {
        deme: usize,
        row_sum: f64,
        col_sum: f64,
        mu: f64,
        tol: f64,
    },

    #[error("weight gamma[{deme}] = {value} is not positive")]
    NonpositiveWeight { deme: usize, value: f64 },

    #[error("invalid migration rates: {0}")]
    InvalidRates(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("population {total} exceeded the cap {cap} at time {time}")]
    PopulationOverflow { total: u64, cap: u64, time: f64 },

    #[error("step size dt = {dt} exceeds the horizon {horizon}")]
    StepTooLarge { dt: f64, horizon: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "grid too coarse on interval {interval}: quadrature error estimate {bound:e} exceeds \
         one standard error {se:e}"
    )]
    GridTooCoarse {
        interval: usize,
        bound: f64,
        se: f64,
    },

    #[error("{count} environment pieces (total time {mass}) fell outside the value bins")]
    ValueOutOfBins { count: usize, mass: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
