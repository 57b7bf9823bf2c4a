#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

/// Simple-vs-natural shape: positive rank 1, a negative value somewhere in
/// the middle third, and a last decile that has settled near zero.
pub fn simple_pattern(diff: &[f64]) -> bool {
    let n = diff.len();
    let first = diff[0];
    let mid = &diff[n / 3..2 * n / 3];
    let tail = &diff[n - n / 10..];
    let tail_mean = tail.iter().map(|v| v.abs()).sum::<f64>() / tail.len() as f64;
    first > 0.0 && mid.iter().any(|v| *v < 0.0) && tail_mean < 0.05 * first
}

/// Erratic-vs-natural shape: negative rank 1 and a positive interior peak.
pub fn erratic_pattern(diff: &[f64]) -> bool {
    let n = diff.len();
    diff[0] < 0.0 && diff[1..n - 1].iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 0.0
}

/// Column two of a `rank,<value>` CSV.
pub fn read_rank_csv(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

/// Every file under `dir` except the feature cache, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if rel == "cache" {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Eq-style normalised delayed correlation by direct summation over every
/// `t` for which both `x_i[t]` and `x_j[t + d]` exist.
pub fn naive_corr(x: &[Vec<f64>], i: usize, j: usize, d: i64) -> f64 {
    let n = x[i].len() as i64;
    let mut num = 0.0;
    for t in 0..n {
        let u = t + d;
        if (0..n).contains(&u) {
            num += x[i][t as usize] * x[j][u as usize];
        }
    }
    let ei: f64 = x[i].iter().map(|v| v * v).sum();
    let ej: f64 = x[j].iter().map(|v| v * v).sum();
    num / (ei * ej).sqrt()
}

pub fn naive_zscore(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|c| {
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            let s = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            c.iter().map(|v| (v - m) / s).collect()
        })
        .collect()
}

/// One scale's KP x KP matrix, row-major, built entry by entry.
pub fn naive_matrix(x: &[Vec<f64>], scale: usize, p: usize) -> Vec<Vec<f64>> {
    let k = x.len();
    let mut m = vec![vec![0.0; k * p]; k * p];
    for i in 0..k {
        for j in 0..k {
            for a in 0..p {
                for b in 0..p {
                    let d = scale as i64 * (b as i64 - a as i64);
                    m[i * p + a][j * p + b] = naive_corr(x, i, j, d);
                }
            }
        }
    }
    m
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Edit distance by memoised recursive search over the three edit moves.
pub fn edit_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo).min(go(a, b, i, j + 1, memo)).min(go(a, b, i + 1, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

/// All sequences of length 0..=max_len over `alphabet` symbols.
pub fn all_sequences(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// MFCCs recomputed with a direct DFT and textbook filterbank/DCT formulas.
/// Returns `coeffs[c][t]`.
pub fn naive_mfcc(x: &[f64], sr: f64) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    let (flen, hop, nfft, nmel, ncep) = (400usize, 160usize, 512usize, 40usize, 13usize);
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let imel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let pts: Vec<f64> = (0..nmel + 2).map(|i| imel(mel(8000.0) * i as f64 / (nmel + 1) as f64)).collect();
    let frames = 1 + (x.len() - flen) / hop;
    let mut out = vec![vec![0.0; frames]; ncep];
    for t in 0..frames {
        let seg = &x[t * hop..t * hop + flen];
        let mut power = vec![0.0; nfft / 2 + 1];
        for (k, pk) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in seg.iter().enumerate() {
                let w = 0.5 * (1.0 - (2.0 * PI * n as f64 / flen as f64).cos());
                let ang = -2.0 * PI * (k * n) as f64 / nfft as f64;
                re += v * w * ang.cos();
                im += v * w * ang.sin();
            }
            *pk = re * re + im * im;
        }
        let logmel: Vec<f64> = (0..nmel)
            .map(|m| {
                let (l, c, h) = (pts[m], pts[m + 1], pts[m + 2]);
                let e: f64 = power
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        let f = k as f64 * sr / nfft as f64;
                        let w = if f > l && f <= c {
                            (f - l) / (c - l)
                        } else if f > c && f < h {
                            (h - f) / (h - c)
                        } else {
                            0.0
                        };
                        p * w * 2.0 / (h - l)
                    })
                    .sum();
                e.max(1e-10).ln()
            })
            .collect();
        for (q, row) in out.iter_mut().enumerate() {
            let scale = if q == 0 { (1.0 / nmel as f64).sqrt() } else { (2.0 / nmel as f64).sqrt() };
            row[t] = scale
                * logmel
                    .iter()
                    .enumerate()
                    .map(|(m, v)| v * (PI * q as f64 * (m as f64 + 0.5) / nmel as f64).cos())
                    .sum::<f64>();
        }
    }
    out
}

/// Period of `x` from the strongest normalised autocorrelation peak with lag
/// in `[sr/fmax, sr/fmin]`, refined by a parabola through the peak.
pub fn autocorr_f0(x: &[f64], sr: f64, fmin: f64, fmax: f64) -> f64 {
    let (lo, hi) = ((sr / fmax).floor() as usize, (sr / fmin).ceil() as usize);
    let r = |lag: usize| -> f64 {
        let n = x.len() - lag;
        let num: f64 = (0..n).map(|t| x[t] * x[t + lag]).sum();
        let e0: f64 = x[..n].iter().map(|v| v * v).sum();
        let e1: f64 = x[lag..].iter().map(|v| v * v).sum();
        num / (e0 * e1).sqrt()
    };
    let vals: Vec<f64> = (lo - 1..=hi + 1).map(r).collect();
    // first local maximum above 0.9 of the best, so subharmonic lags lose
    let best = vals[1..vals.len() - 1].iter().cloned().fold(f64::MIN, f64::max);
    let idx = (1..vals.len() - 1)
        .find(|&i| vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > 0.9 * best)
        .unwrap();
    let (a, b, c) = (vals[idx - 1], vals[idx], vals[idx + 1]);
    let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
    sr / ((lo - 1 + idx) as f64 + shift)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn sine(freq: f64, amp: f64, seconds: f64, sr: u32) -> Vec<f64> {
    let n = (seconds * sr as f64).round() as usize;
    (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin()).collect()
}

/// Seeded uniform noise series, `k` channels by `t` frames.
pub fn random_series(k: usize, t: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| (0..t).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}
