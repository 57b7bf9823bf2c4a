//! Library results against independent reference computations.

mod common;

use accent_coord::acoustic::{mfcc, pyin_pitch, MfccConfig, PitchConfig};
use accent_coord::audio::{decode_wav, encode_wav, resample, AudioBuffer, WavEncoding};
use accent_coord::coord::{
    build_stacked_matrix, delayed_correlation, symmetric_eigenvalues, CoordConfig, RankOrder,
};
use accent_coord::series::ChannelSeries;
use accent_coord::transcription::levenshtein;
use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

#[test]
fn delayed_correlation_matches_direct_sum() {
    for seed in 0..5 {
        let x = random_series(4, 300, seed);
        let s = ChannelSeries::unnamed(x.clone(), 100.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for d in -63..=63 {
                    let got = delayed_correlation(&s, i, j, d).unwrap();
                    assert!((got - naive_corr(&x, i, j, d)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn stacked_matrix_matches_entrywise_construction() {
    let x = random_series(3, 200, 9);
    let s = ChannelSeries::unnamed(x.clone(), 100.0).unwrap();
    let cfg = CoordConfig::default();
    let m = build_stacked_matrix(&s, &cfg).unwrap();
    let z = naive_zscore(&x);
    for (si, scale) in cfg.scales.iter().enumerate() {
        let want = naive_matrix(&z, *scale, 10);
        for (r, row) in want.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((m.per_scale[si][(r, c)] - v).abs() < 1e-12, "scale {scale} ({r},{c})");
            }
        }
    }
}

#[test]
fn eigenvalues_match_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=12 {
        for _ in 0..10 {
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.random_range(-5.0..5.0);
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
            let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
            let got = symmetric_eigenvalues(&m, RankOrder::Signed).unwrap();
            let want = jacobi_eigenvalues(a);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-8, "n={n}: {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn levenshtein_matches_recursive_search() {
    let seqs = all_sequences(3, 4);
    for a in &seqs {
        for b in &seqs {
            assert_eq!(levenshtein(a, b), edit_oracle(a, b), "{a:?} {b:?}");
        }
    }
}

#[test]
fn mfcc_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..4000).map(|_| rng.random_range(-0.5..0.5)).collect();
    let got = mfcc(&AudioBuffer::new(x.clone(), 16_000).unwrap(), &MfccConfig::default()).unwrap();
    let want = naive_mfcc(&x, 16_000.0);
    assert_eq!(got.frames(), want[0].len());
    for (c, row) in want.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            assert!((got.channel(c)[t] - v).abs() < 1e-6, "c{c} t{t}: {} vs {v}", got.channel(c)[t]);
        }
    }
}

#[test]
fn pitch_agrees_with_autocorrelation_period() {
    for f in [120.0, 220.0, 330.0] {
        let x = sine(f, 0.5, 1.0, 16_000);
        let oracle = autocorr_f0(&x, 16_000.0, 60.0, 400.0);
        assert!((oracle / f - 1.0).abs() < 0.005, "oracle {oracle} for {f}");
        let track = pyin_pitch(&AudioBuffer::new(x, 16_000).unwrap(), &PitchConfig::default()).unwrap();
        let mut voiced: Vec<f64> = track.f0.iter().copied().filter(|v| *v > 0.0).collect();
        let med = median(&mut voiced);
        assert!((med / oracle - 1.0).abs() < 0.02, "pyin {med} vs oracle {oracle}");
    }
}

fn peak_hz(x: &[f64], sr: f64) -> (f64, Vec<f64>) {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, v)| Complex::new(v * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
    let k = mag.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    (k as f64 * sr / n as f64, mag)
}

#[test]
fn wav_round_trip_keeps_tone() {
    let x = sine(440.0, 0.6, 0.5, 22_050);
    for enc in [WavEncoding::Pcm16, WavEncoding::Pcm24, WavEncoding::Pcm32, WavEncoding::Float32] {
        let buf = decode_wav(&encode_wav(std::slice::from_ref(&x), 22_050, enc)).unwrap();
        assert_eq!(buf.sample_rate, 22_050);
        let err = buf.samples.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1.0 / 32768.0, "{enc:?}: {err}");
        let (hz, _) = peak_hz(&buf.samples, 22_050.0);
        assert!((hz - 440.0).abs() < 2.0);
    }
}

#[test]
fn resampled_tone_keeps_frequency() {
    for (src, f) in [(44_100, 300.0), (8_000, 1_000.0), (48_000, 3_000.0)] {
        let x = sine(f, 0.5, 1.0, src);
        let y = resample(&AudioBuffer::new(x, src).unwrap(), 16_000).unwrap();
        assert_eq!(y.samples.len(), 16_000);
        let (hz, _) = peak_hz(&y.samples, 16_000.0);
        assert!((hz - f).abs() <= 1.0, "{src} Hz source: peak at {hz}");
    }
}

#[test]
fn resampling_rejects_content_above_new_nyquist() {
    let sr = 44_100;
    let pass = resample(&AudioBuffer::new(sine(1_000.0, 0.5, 1.0, sr), sr).unwrap(), 16_000).unwrap();
    let stop = resample(&AudioBuffer::new(sine(10_000.0, 0.5, 1.0, sr), sr).unwrap(), 16_000).unwrap();
    let rms = |v: &[f64]| (v[500..v.len() - 500].iter().map(|x| x * x).sum::<f64>() / (v.len() - 1000) as f64).sqrt();
    let db = 20.0 * (rms(&stop.samples) / rms(&pass.samples)).log10();
    assert!(db < -60.0, "stop band at {db:.1} dB");
}
