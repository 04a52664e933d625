use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal is empty")]
    EmptySignal,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unsupported resampling ratio {0}")]
    UnsupportedRatio(f64),
    #[error("frequency {freq} Hz aliases at sample rate {rate} Hz")]
    Aliasing { freq: f64, rate: f64 },
    #[error("unsupported QAM order {0}")]
    UnsupportedQam(usize),
    #[error("photocurrent is identically zero")]
    ZeroCurrent,
    #[error("synchronization failed: peak-to-second-peak ratio {0:.2} dB")]
    SyncFailure(f64),
    #[error("ambiguous correlation peak: ratio {0:.2} dB")]
    AmbiguousPeak(f64),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
