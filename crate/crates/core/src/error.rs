use alloc::string::{String, ToString};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("waveform of {len} samples is shorter than the longest CQT kernel ({kernel} samples)")]
    TooShort { len: usize, kernel: usize },
    #[error("scope shift of {shift} bins exceeds the allowed range of +/-{max}")]
    ShiftOutOfRange { shift: i32, max: i32 },
    #[error("no harmonic content: every frame is silent")]
    NoHarmonicContent,
    #[error("no voiced reference frames to evaluate")]
    NoVoicedFrames,
    #[error("frame alignment failed: {0}")]
    Alignment(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(
        what: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::ShapeMismatch {
            what,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
