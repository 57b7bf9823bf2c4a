//! Acoustic feature extraction: 13 MFCCs and probabilistic-YIN pitch.

mod mfcc;
mod pitch;

use thiserror::Error;

pub use mfcc::{mfcc, MelFilterbank, MfccConfig};
pub use pitch::{mean_pitch, pyin_pitch, PitchConfig, PitchTrack, VoicedStats};

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error("audio too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("expected {expected} Hz audio, got {got} Hz")]
    WrongRate { expected: u32, got: u32 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
