use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParam { key: &'static str, reason: String },

    #[error("local vector at site {site} has squared norm {norm2}, expected 1")]
    Unnormalized { site: usize, norm2: f64 },

    #[error("empty state")]
    Empty,

    #[error("gate is not unitary (max deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("site index {index} out of range for a lattice of {len} sites")]
    OutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("state has no emitter site")]
    NoEmitter,

    #[error("expected exactly one emitter site, found {0}")]
    EmitterCount(usize),

    #[error("phase {phi} is not a resonance (multiple of pi)")]
    OffResonance { phi: f64 },

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
