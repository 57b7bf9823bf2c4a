//! Probabilistic YIN.
//!
//! Each frame yields a set of candidate periods from the troughs of the
//! cumulative mean normalised difference function, weighted by a Beta(2, 18)
//! prior over YIN thresholds. Candidates are binned onto a 48-per-octave
//! log-frequency grid; an HMM with a voiced and an unvoiced copy of every
//! bin is decoded with Viterbi to produce a smooth track with voicing flags.

use serde::{Deserialize, Serialize};

use super::AcousticError;
use crate::audio::{AudioBuffer, ANALYSIS_RATE};

const BINS_PER_OCTAVE: f64 = 48.0;
/// Fastest pitch glide the transition model allows, in octaves per second.
const MAX_TRANSITION_RATE: f64 = 35.92;
/// Mass given to the global minimum when no trough is below a threshold.
const NO_TROUGH_PROB: f64 = 0.01;
const BETA_A: i32 = 2;
const BETA_B: i32 = 18;
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub threshold_count: usize,
    pub voicing_switch_prob: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            hop: 160,
            fmin: 60.0,
            fmax: 400.0,
            threshold_count: 100,
            voicing_switch_prob: 0.01,
        }
    }
}

impl PitchConfig {
    fn window(&self) -> usize {
        self.frame_length / 2
    }

    fn period_range(&self, sr: f64) -> (usize, usize) {
        let min_period = ((sr / self.fmax).floor() as usize).max(1);
        let max_period =
            ((sr / self.fmin).ceil() as usize).min(self.frame_length - self.window() - 1);
        (min_period, max_period)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), AcousticError> {
        let bad = |m: String| Err(AcousticError::InvalidConfig(m));
        let sr = sample_rate as f64;
        if !(self.fmin > 0.0 && self.fmin < self.fmax) {
            return bad(format!("need 0 < fmin < fmax (got {} / {})", self.fmin, self.fmax));
        }
        if sr / self.fmax < 2.0 {
            return bad(format!("fmax {} too close to Nyquist", self.fmax));
        }
        if self.hop == 0 || self.threshold_count == 0 {
            return bad("hop and threshold_count must be positive".into());
        }
        if !(self.voicing_switch_prob > 0.0 && self.voicing_switch_prob < 1.0) {
            return bad("voicing_switch_prob must be in (0, 1)".into());
        }
        if self.frame_length < 8 {
            return bad("frame_length too small".into());
        }
        let (lo, hi) = self.period_range(sr);
        if hi < lo + 2 {
            return bad(format!(
                "frame_length {} leaves no usable lag range for fmin {}",
                self.frame_length, self.fmin
            ));
        }
        if (self.frame_length as f64) < 2.0 * sr / self.fmin {
            log::warn!(
                "pitch frame_length {} is shorter than two periods of fmin {} Hz",
                self.frame_length,
                self.fmin
            );
        }
        Ok(())
    }
}

/// Per-frame pitch estimates. `f0[t] == 0.0` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub f0: Vec<f64>,
    pub voiced_prob: Vec<f64>,
    pub frame_rate: f64,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn voiced_frames(&self) -> usize {
        self.f0.iter().filter(|&&f| f > 0.0).count()
    }
}

/// Running sum of voiced f0 values, used to pool frames across utterances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VoicedStats {
    pub sum_hz: f64,
    pub frames: usize,
}

impl VoicedStats {
    pub fn of(track: &PitchTrack) -> Self {
        track.f0.iter().filter(|&&f| f > 0.0).fold(Self::default(), |acc, &f| Self {
            sum_hz: acc.sum_hz + f,
            frames: acc.frames + 1,
        })
    }

    pub fn merge(self, other: Self) -> Self {
        Self { sum_hz: self.sum_hz + other.sum_hz, frames: self.frames + other.frames }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.frames > 0).then(|| self.sum_hz / self.frames as f64)
    }
}

/// Mean f0 over voiced frames; `None` when nothing is voiced.
pub fn mean_pitch(track: &PitchTrack) -> Option<f64> {
    VoicedStats::of(track).mean()
}

/// CDF of Beta(a, b) for integer parameters, via the binomial identity
/// I_x(a, b) = P[Binomial(a + b - 1, x) >= a].
fn beta_cdf(x: f64, a: i32, b: i32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let n = a + b - 1;
    let mut binom = 1.0;
    let mut below = 0.0;
    for j in 0..a {
        below += binom * x.powi(j) * (1.0 - x).powi(n - j);
        binom *= (n - j) as f64 / (j + 1) as f64;
    }
    1.0 - below
}

fn threshold_prior(count: usize) -> (Vec<f64>, Vec<f64>) {
    let thresholds: Vec<f64> = (0..=count).map(|k| k as f64 / count as f64).collect();
    let cdf: Vec<f64> = thresholds.iter().map(|&t| beta_cdf(t, BETA_A, BETA_B)).collect();
    let probs = cdf.windows(2).map(|w| w[1] - w[0]).collect();
    (thresholds, probs)
}

/// Cumulative mean normalised difference for lags `0..=max_lag`.
fn cmnd(frame: &[f64], window: usize, max_lag: usize) -> Vec<f64> {
    let head = &frame[..window];
    let energy0: f64 = head.iter().map(|x| x * x).sum();
    let mut energy_tau = energy0;
    let mut d = vec![0.0; max_lag + 1];
    for tau in 1..=max_lag {
        energy_tau += frame[window + tau - 1].powi(2) - frame[tau - 1].powi(2);
        let cross: f64 = head.iter().zip(&frame[tau..tau + window]).map(|(a, b)| a * b).sum();
        d[tau] = (energy0 + energy_tau - 2.0 * cross).max(0.0);
    }
    let mut out = vec![1.0; max_lag + 1];
    let mut running = 0.0;
    let scale = energy0.max(1e-300);
    for tau in 1..=max_lag {
        running += d[tau];
        // a vanishing running sum means a silent frame: no periodicity
        out[tau] = if running > 1e-12 * scale && running > 1e-18 {
            d[tau] * tau as f64 / running
        } else {
            1.0
        };
    }
    out
}

struct Candidate {
    period: f64,
    prob: f64,
}

/// Pitch candidates of one frame from its CMND curve over the lag range.
fn frame_candidates(
    y: &[f64],
    min_period: usize,
    thresholds: &[f64],
    beta_probs: &[f64],
) -> Vec<Candidate> {
    let n = y.len();
    let troughs: Vec<usize> = (0..n)
        .filter(|&i| {
            if i == 0 {
                n > 1 && y[0] < y[1]
            } else if i + 1 == n {
                false
            } else {
                y[i] < y[i - 1] && y[i] <= y[i + 1]
            }
        })
        .collect();
    if troughs.is_empty() {
        return Vec::new();
    }
    let global_min = *troughs
        .iter()
        .min_by(|&&a, &&b| y[a].total_cmp(&y[b]))
        .expect("non-empty");

    let mut mass = vec![0.0; troughs.len()];
    for (k, &p) in beta_probs.iter().enumerate() {
        let th = thresholds[k + 1];
        match troughs.iter().position(|&i| y[i] < th) {
            Some(first) => mass[first] += p,
            None => {
                let g = troughs.iter().position(|&i| i == global_min).expect("present");
                mass[g] += NO_TROUGH_PROB * p;
            }
        }
    }

    troughs
        .iter()
        .zip(mass)
        .filter(|(_, m)| *m > 0.0)
        .map(|(&i, prob)| {
            let shift = if i > 0 && i + 1 < n {
                let a = y[i + 1] + y[i - 1] - 2.0 * y[i];
                let b = (y[i + 1] - y[i - 1]) / 2.0;
                if b.abs() < a.abs() {
                    -b / a
                } else {
                    0.0
                }
            } else {
                0.0
            };
            Candidate { period: (min_period + i) as f64 + shift, prob }
        })
        .collect()
}

/// Estimates a smoothed f0 track, one frame per hop with frames centred on
/// `t * hop` (the signal is zero padded by half a frame at both ends).
pub fn pyin_pitch(buf: &AudioBuffer, cfg: &PitchConfig) -> Result<PitchTrack, AcousticError> {
    if buf.sample_rate != ANALYSIS_RATE {
        return Err(AcousticError::WrongRate { expected: ANALYSIS_RATE, got: buf.sample_rate });
    }
    cfg.validate(buf.sample_rate)?;
    let window = cfg.window();
    if buf.samples.len() < window {
        return Err(AcousticError::TooShort { needed: window, got: buf.samples.len() });
    }
    let sr = buf.sample_rate as f64;
    let (min_period, max_period) = cfg.period_range(sr);
    let (thresholds, beta_probs) = threshold_prior(cfg.threshold_count);

    let n_bins = (BINS_PER_OCTAVE * (cfg.fmax / cfg.fmin).log2()).floor() as usize + 1;
    let bin_freq = |b: usize| cfg.fmin * 2f64.powf(b as f64 / BINS_PER_OCTAVE);

    let pad = cfg.frame_length / 2;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(&buf.samples);
    padded.resize(padded.len() + pad, 0.0);
    let n_frames = 1 + buf.samples.len() / cfg.hop;

    // observation likelihoods: bins 0..n_bins voiced, n_bins.. unvoiced
    let mut obs = vec![vec![0.0; 2 * n_bins]; n_frames];
    // exact candidate frequency with the most mass in each bin
    let mut best_freq = vec![vec![(0.0f64, 0.0f64); n_bins]; n_frames];
    let mut voiced_prob = vec![0.0; n_frames];

    for t in 0..n_frames {
        let frame = &padded[t * cfg.hop..t * cfg.hop + cfg.frame_length];
        let curve = cmnd(frame, window, max_period);
        let cands = frame_candidates(&curve[min_period..=max_period], min_period, &thresholds, &beta_probs);
        let mut total = 0.0;
        for c in cands {
            let f = sr / c.period;
            let b = (BINS_PER_OCTAVE * (f / cfg.fmin).log2()).round().clamp(0.0, (n_bins - 1) as f64)
                as usize;
            obs[t][b] += c.prob;
            total += c.prob;
            if c.prob > best_freq[t][b].1 {
                best_freq[t][b] = (f, c.prob);
            }
        }
        let vp = total.clamp(0.0, 1.0);
        voiced_prob[t] = vp;
        let unvoiced = (1.0 - vp) / n_bins as f64;
        for b in 0..n_bins {
            obs[t][n_bins + b] = unvoiced;
        }
    }

    let max_semitones = (MAX_TRANSITION_RATE * 12.0 * cfg.hop as f64 / sr).round();
    let half_width = (max_semitones * BINS_PER_OCTAVE / 12.0) as usize;
    let states = viterbi(&obs, n_bins, half_width, cfg.voicing_switch_prob);

    let f0 = states
        .iter()
        .enumerate()
        .map(|(t, &s)| {
            if s >= n_bins {
                return 0.0;
            }
            let (f, p) = best_freq[t][s];
            let f = if p > 0.0 { f } else { bin_freq(s) };
            f.clamp(cfg.fmin, cfg.fmax)
        })
        .collect();

    Ok(PitchTrack { f0, voiced_prob, frame_rate: sr / cfg.hop as f64 })
}

/// Log-domain Viterbi over `2 * n_bins` states with a triangular local
/// pitch transition of half-width `half_width` bins, combined with a
/// symmetric voiced/unvoiced switch.
fn viterbi(obs: &[Vec<f64>], n_bins: usize, half_width: usize, switch: f64) -> Vec<usize> {
    let n_states = 2 * n_bins;
    let hw = half_width as isize;

    // triangle weights 1 - d/(hw+1), rows normalised over reachable bins
    let tri = |d: usize| 1.0 - d as f64 / (half_width + 1) as f64;
    let row_norm: Vec<f64> = (0..n_bins as isize)
        .map(|src| {
            ((src - hw).max(0)..=(src + hw).min(n_bins as isize - 1))
                .map(|dst| tri(src.abs_diff(dst)))
                .sum()
        })
        .collect();
    let log_stay = (1.0 - switch).ln();
    let log_switch = switch.ln();

    let log_obs = |t: usize, s: usize| obs[t][s].max(LOG_FLOOR).ln();

    let mut score: Vec<f64> =
        (0..n_states).map(|s| -(n_states as f64).ln() + log_obs(0, s)).collect();
    let mut back = vec![vec![0usize; n_states]; obs.len()];
    let mut next = vec![0.0; n_states];

    for t in 1..obs.len() {
        for dst in 0..n_states {
            let (dst_half, dst_bin) = (dst / n_bins, dst % n_bins);
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            let lo = (dst_bin as isize - hw).max(0) as usize;
            let hi = (dst_bin + half_width).min(n_bins - 1);
            for src_half in 0..2 {
                let log_sw = if src_half == dst_half { log_stay } else { log_switch };
                for src_bin in lo..=hi {
                    let src = src_half * n_bins + src_bin;
                    let w = (tri(src_bin.abs_diff(dst_bin)) / row_norm[src_bin]).ln();
                    let cand = score[src] + log_sw + w;
                    if cand > best {
                        best = cand;
                        arg = src;
                    }
                }
            }
            next[dst] = best + log_obs(t, dst);
            back[t][dst] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }

    let mut state = (0..n_states)
        .max_by(|&a, &b| score[a].total_cmp(&score[b]))
        .unwrap_or(n_bins);
    let mut path = vec![0; obs.len()];
    for t in (0..obs.len()).rev() {
        path[t] = state;
        state = back[t][state];
    }
    path
}
