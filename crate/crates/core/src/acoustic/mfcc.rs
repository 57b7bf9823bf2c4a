use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AcousticError;
use crate::audio::{AudioBuffer, ANALYSIS_RATE};
use crate::series::ChannelSeries;

/// MFCC front end. Defaults: 25 ms Hann frames every 10 ms, 512-point FFT,
/// 40 HTK-mel filters over 0-8 kHz, 13 coefficients with c0 kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub mel_filters: usize,
    pub num_coeffs: usize,
    pub mel_fmin: f64,
    pub mel_fmax: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_length: 400,
            hop: 160,
            fft_size: 512,
            mel_filters: 40,
            num_coeffs: 13,
            mel_fmin: 0.0,
            mel_fmax: 8_000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), AcousticError> {
        let bad = |m: &str| Err(AcousticError::InvalidConfig(m.to_string()));
        if self.num_coeffs == 0 || self.num_coeffs > self.mel_filters {
            return bad("num_coeffs must be in 1..=mel_filters");
        }
        if self.frame_length == 0 || self.frame_length > self.fft_size {
            return bad("frame_length must be in 1..=fft_size");
        }
        if self.hop == 0 {
            return bad("hop must be at least 1");
        }
        if !(self.mel_fmin >= 0.0 && self.mel_fmin < self.mel_fmax) {
            return bad("mel_fmin must be non-negative and below mel_fmax");
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive");
        }
        Ok(())
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-mel filters, each scaled to unit area in Hz.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `weights[m][k]` for filter m and FFT bin k in `0..=fft_size/2`.
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, fft_size: usize, sample_rate: f64, fmin: f64, fmax: f64) -> Self {
        let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        let n_bins = fft_size / 2 + 1;
        let weights = (0..n_filters)
            .map(|m| {
                let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let norm = 2.0 / (hi - lo);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * sample_rate / fft_size as f64;
                        let rise = (f - lo) / (c - lo);
                        let fall = (hi - f) / (hi - c);
                        norm * rise.min(fall).max(0.0)
                    })
                    .collect()
            })
            .collect();
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Orthonormal DCT-II basis rows for the first `n_out` coefficients.
fn dct_basis(n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let s = if k == 0 { (1.0 / n_in as f64).sqrt() } else { (2.0 / n_in as f64).sqrt() };
            (0..n_in)
                .map(|m| s * (PI * k as f64 * (2 * m + 1) as f64 / (2 * n_in) as f64).cos())
                .collect()
        })
        .collect()
}

/// Periodic Hann window.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Computes `num_coeffs` MFCCs per frame. Frames are not centred:
/// `T = 1 + (len - frame_length) / hop`.
pub fn mfcc(buf: &AudioBuffer, cfg: &MfccConfig) -> Result<ChannelSeries, AcousticError> {
    cfg.validate()?;
    if buf.sample_rate != ANALYSIS_RATE {
        return Err(AcousticError::WrongRate { expected: ANALYSIS_RATE, got: buf.sample_rate });
    }
    let n = buf.samples.len();
    if n < cfg.frame_length {
        return Err(AcousticError::TooShort { needed: cfg.frame_length, got: n });
    }
    let n_frames = 1 + (n - cfg.frame_length) / cfg.hop;
    if n_frames < 2 {
        return Err(AcousticError::TooShort { needed: cfg.frame_length + cfg.hop, got: n });
    }

    let sr = buf.sample_rate as f64;
    let bank = MelFilterbank::new(cfg.mel_filters, cfg.fft_size, sr, cfg.mel_fmin, cfg.mel_fmax);
    let basis = dct_basis(cfg.mel_filters, cfg.num_coeffs);
    let window = hann(cfg.frame_length);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);

    let mut coeffs = vec![Vec::with_capacity(n_frames); cfg.num_coeffs];
    let mut spectrum = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut power = vec![0.0; cfg.fft_size / 2 + 1];
    for t in 0..n_frames {
        let frame = &buf.samples[t * cfg.hop..t * cfg.hop + cfg.frame_length];
        spectrum.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (dst, (x, w)) in spectrum.iter_mut().zip(frame.iter().zip(&window)) {
            dst.re = x * w;
        }
        fft.process(&mut spectrum);
        for (p, c) in power.iter_mut().zip(&spectrum) {
            *p = c.norm_sqr();
        }
        let log_mel: Vec<f64> =
            bank.apply(&power).into_iter().map(|e| e.max(cfg.log_floor).ln()).collect();
        for (out, row) in coeffs.iter_mut().zip(&basis) {
            out.push(row.iter().zip(&log_mel).map(|(a, b)| a * b).sum());
        }
    }
    ChannelSeries::unnamed(coeffs, sr / cfg.hop as f64)
        .map_err(|e| AcousticError::InvalidConfig(e.to_string()))
}
