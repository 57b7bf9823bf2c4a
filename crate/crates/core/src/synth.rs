//! Synthetic multichannel signals with controlled coordination complexity.
//!
//! Each channel mixes a shared low-frequency oscillator bank (lagged by a
//! small per-channel offset) with independent smoothed noise. The noise
//! ratio selects the regime: mostly shared motion gives simple
//! coordination, an even mix is "natural", pure noise is erratic.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`, so a
//! `(seed, spec)` pair reproduces the same series on every platform.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::coord::{CoordConfig, Eigenspectrum};
use crate::series::{ChannelSeries, DEFAULT_FRAME_RATE, TV_CHANNELS};

/// Lag of the last channel behind the first, in seconds.
const MAX_CHANNEL_LAG: f64 = 0.04;
const SMOOTHING: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Invalid(String),
    #[error("spectrum is all zero after clamping negatives")]
    AllZeroSpectrum,
    #[error("scale index {index} out of range ({available} scales)")]
    ScaleOutOfRange { index: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Simple,
    Natural,
    Erratic,
}

impl SynthKind {
    pub fn default_noise_ratio(self) -> f64 {
        match self {
            SynthKind::Simple => 0.05,
            SynthKind::Natural => 0.5,
            SynthKind::Erratic => 1.0,
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(SynthKind::Simple),
            "natural" => Ok(SynthKind::Natural),
            "erratic" => Ok(SynthKind::Erratic),
            other => Err(SynthError::Invalid(format!("unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub channels: usize,
    pub frames: usize,
    pub seed: u64,
    /// Shared oscillator frequencies in Hz.
    pub base_freqs: Vec<f64>,
    pub noise_ratio: f64,
    pub frame_rate: f64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, channels: usize, frames: usize, seed: u64) -> Self {
        Self {
            kind,
            channels,
            frames,
            seed,
            base_freqs: vec![1.0, 2.3],
            noise_ratio: kind.default_noise_ratio(),
            frame_rate: DEFAULT_FRAME_RATE,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let min_frames = CoordConfig::default().min_frames();
        if self.channels < 2 {
            return Err(SynthError::Invalid("need at least 2 channels".into()));
        }
        if self.frames < min_frames {
            return Err(SynthError::Invalid(format!("need at least {min_frames} frames")));
        }
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            return Err(SynthError::Invalid("noise_ratio must be in [0, 1]".into()));
        }
        if self.base_freqs.is_empty() || self.base_freqs.iter().any(|f| !(*f > 0.0)) {
            return Err(SynthError::Invalid("base_freqs must be positive".into()));
        }
        if !(self.frame_rate > 0.0) {
            return Err(SynthError::Invalid("frame_rate must be positive".into()));
        }
        Ok(())
    }
}

fn channel_names(k: usize) -> Vec<String> {
    if k == TV_CHANNELS.len() {
        TV_CHANNELS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..k).map(|i| format!("c{i}")).collect()
    }
}

/// Generates a series per `spec`. Six-channel series carry the TV names.
pub fn gen_coordinated(spec: &SynthSpec) -> Result<ChannelSeries, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phases: Vec<f64> = spec.base_freqs.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let osc_gain = (2.0 / spec.base_freqs.len() as f64).sqrt();
    let k = spec.channels;

    let values = (0..k)
        .map(|ch| {
            let lag = MAX_CHANNEL_LAG * ch as f64 / (k - 1) as f64;
            let white: Vec<f64> =
                (0..spec.frames + SMOOTHING - 1).map(|_| rng.sample(StandardNormal)).collect();
            (0..spec.frames)
                .map(|t| {
                    let time = t as f64 / spec.frame_rate - lag;
                    let shared: f64 = spec
                        .base_freqs
                        .iter()
                        .zip(&phases)
                        .map(|(f, ph)| (2.0 * PI * f * time + ph).sin())
                        .sum::<f64>()
                        * osc_gain;
                    // moving average of 4 unit normals has variance 1/4
                    let noise = white[t..t + SMOOTHING].iter().sum::<f64>() / SMOOTHING as f64 * 2.0;
                    (1.0 - spec.noise_ratio) * shared + spec.noise_ratio * noise
                })
                .collect()
        })
        .collect();
    ChannelSeries::new(values, channel_names(k), spec.frame_rate)
        .map_err(|e| SynthError::Invalid(e.to_string()))
}

/// Participation ratio `(sum l)^2 / sum l^2` of one scale's eigenvalues,
/// with negative eigenvalues clamped to zero.
pub fn effective_rank(spec: &Eigenspectrum, scale_index: usize) -> Result<f64, SynthError> {
    let vals = spec.per_scale.get(scale_index).ok_or(SynthError::ScaleOutOfRange {
        index: scale_index,
        available: spec.per_scale.len(),
    })?;
    let (sum, sq) = vals
        .iter()
        .map(|v| v.max(0.0))
        .fold((0.0, 0.0), |(s, q), v| (s + v, q + v * v));
    if sq == 0.0 {
        return Err(SynthError::AllZeroSpectrum);
    }
    Ok(sum * sum / sq)
}

/// A voiced test signal: a harmonic series on `f0` with slow vibrato and a
/// little seeded noise, scaled to peak near 0.5.
pub fn gen_voice(f0: f64, seconds: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer, SynthError> {
    if !(f0 > 0.0 && f0 < sample_rate as f64 / 4.0) || !(seconds > 0.0) {
        return Err(SynthError::Invalid("need 0 < f0 < sr/4 and positive duration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    let harmonics = ((sr / 2.0 * 0.8) / f0).floor().min(12.0) as usize;
    let vib_rate = rng.random_range(4.0..6.0);
    let vib_phase = rng.random_range(0.0..2.0 * PI);
    let mut phase = 0.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let f = f0 * (1.0 + 0.005 * (2.0 * PI * vib_rate * t + vib_phase).sin());
            phase += 2.0 * PI * f / sr;
            let tone: f64 = (1..=harmonics).map(|h| (h as f64 * phase).sin() / h as f64).sum();
            let noise: f64 = rng.sample(StandardNormal);
            0.25 * tone + 0.002 * noise
        })
        .collect();
    AudioBuffer::new(samples, sample_rate).map_err(|e| SynthError::Invalid(e.to_string()))
}
