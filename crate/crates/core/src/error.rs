use thiserror::Error;

/// Errors raised by the decomposition, the tests, and the simulation pipeline.
#[derive(Debug, Error)]
pub enum CohError {
    #[error("signal too short: {0}")]
    SignalTooShort(String),
    #[error("invalid band range [{low}, {high}] Hz")]
    InvalidBandRange { low: f64, high: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("no spectral peak: every band has zero power")]
    NoPeak,
    #[error("index {index} out of range for length {len}")]
    BadIndex { index: usize, len: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("predictor is identically zero")]
    DegeneratePredictor,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("lag {lag} out of range for {len} rows")]
    BadLag { lag: usize, len: usize },
    #[error("target coherence {0} outside (0, 1)")]
    BadTarget(f64),
    #[error("could not load signal: {0}")]
    DriverLoad(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("bad input file: {0}")]
    Schema(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type CohResult<T> = Result<T, CohError>;
