use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("n_modes must be at least 2 (mode j=1 carries the noise), got {0}")]
    TooFewModes(usize),

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("point {0} lies outside [0, pi]")]
    OutsideDomain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("noise mode {mode} not available (valid range 1..={max})")]
    NoiseMode { mode: usize, max: usize },

    #[error("step index overflow: coarse step {step} with ratio {ratio}")]
    StepOverflow { step: u64, ratio: u64 },

    #[error("non-finite state in trajectory {trajectory} at step {step}")]
    NonFinite { trajectory: u64, step: u64 },

    #[error("time {t} is not a multiple of the step size {tau}")]
    OffGrid { t: f64, tau: f64 },

    #[error("incompatible discretizations: {0}")]
    Incompatible(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("running average queried before any sample")]
    NoSamples,

    #[error("need at least {needed} rows for a regression, got {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
