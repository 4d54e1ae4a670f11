use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidSpec(String),

    #[error("Lee criterion violated: gamma = {gamma} must be below {limit} for this quantizer")]
    LeeCriterion { gamma: f64, limit: f64 },

    #[error("peak-gain normalization did not converge (order {order}, osr {osr}, gamma {gamma}): {reason}")]
    NotConverged {
        order: usize,
        osr: f64,
        gamma: f64,
        reason: String,
    },

    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("transfer function is degenerate: pole on the unit circle at normalized frequency {0}")]
    PoleOnUnitCircle(f64),

    #[error("simulation diverged at sample {sample}: non-finite loop state")]
    Diverged { sample: usize },

    #[error("modulator is unstable even at the smallest probe amplitude {amplitude}")]
    BrokenNtf { amplitude: f64 },

    #[error("input too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("tone at normalized frequency {tone} lies outside band [{lo}, {hi}]")]
    ToneOutsideBand { tone: f64, lo: f64, hi: f64 },

    #[error("PSD grid of {grid} points is not divisible by carrier period {period}")]
    GridNotDivisible { grid: usize, period: usize },

    #[error("sweep point order {order}, osr {osr}, gamma {gamma} failed: {source}")]
    SweepPoint {
        order: usize,
        osr: f64,
        gamma: f64,
        source: Box<Error>,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid carrier: {0}")]
    InvalidCarrier(String),

    #[error("stream format: {0}")]
    Format(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedWav(String),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
