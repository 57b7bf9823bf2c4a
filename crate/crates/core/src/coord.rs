//! Channel-delay correlation matrices and their eigenspectra.
//!
//! For a series with K channels, every delay scale `n` produces a KP x KP
//! matrix made of a K x K grid of P x P blocks. Block `(i, j)` holds the
//! normalised delayed correlations `r[i,j](n * (q - p))` at row `p`,
//! column `q`. Negative delays are defined through `r[i,j](-d) = r[j,i](d)`,
//! which makes every per-scale matrix exactly symmetric with unit diagonal.
//! The per-scale matrices stacked in scale order form a 4KP x KP matrix
//! for the default four scales.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::series::{mean_std, ChannelSeries};

/// Channels with a standard deviation below this cannot be normalised.
pub const DEGENERATE_STD: f64 = 1e-8;
/// Overlap, in frames, required beyond the largest delay.
pub const MIN_OVERLAP: usize = 10;

const SYMMETRY_TOL: f64 = 1e-8;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Error)]
pub enum CoordError {
    #[error("channel {0} is degenerate (near-zero variance)")]
    DegenerateChannel(String),
    #[error("delay {delay} is not shorter than the series ({frames} frames)")]
    DelayTooLarge { delay: i64, frames: usize },
    #[error("utterance has {frames} frames; at least {required} are required")]
    UtteranceTooShort { frames: usize, required: usize },
    #[error("eigendecomposition did not converge at scale {scale}")]
    ConvergenceFailure { scale: usize },
    #[error("matrix at scale {scale} is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { scale: usize, asymmetry: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty group")]
    EmptyGroup,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoordConfig {
    pub scales: Vec<usize>,
    pub delays_per_scale: usize,
    pub zscore: bool,
}

impl Default for CoordConfig {
    fn default() -> Self {
        Self { scales: vec![1, 3, 5, 7], delays_per_scale: 10, zscore: true }
    }
}

impl CoordConfig {
    pub fn validate(&self) -> Result<(), CoordError> {
        if self.scales.is_empty() || self.scales[0] == 0 {
            return Err(CoordError::InvalidConfig("scales must be positive".into()));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoordError::InvalidConfig("scales must be strictly increasing".into()));
        }
        if self.delays_per_scale < 2 {
            return Err(CoordError::InvalidConfig("delays_per_scale must be at least 2".into()));
        }
        Ok(())
    }

    /// Smallest frame count accepted by [`build_stacked_matrix`].
    pub fn min_frames(&self) -> usize {
        let max_scale = self.scales.last().copied().unwrap_or(1);
        max_scale * (self.delays_per_scale - 1) + MIN_OVERLAP + 1
    }
}

/// Standardises every channel to zero mean and unit population variance.
pub fn z_score(s: &ChannelSeries) -> Result<ChannelSeries, CoordError> {
    let mut out = Vec::with_capacity(s.channels());
    for (name, ch) in s.names().iter().zip(s.values()) {
        let (mean, std) = mean_std(ch);
        if !(std >= DEGENERATE_STD) {
            return Err(CoordError::DegenerateChannel(name.clone()));
        }
        out.push(ch.iter().map(|v| (v - mean) / std).collect());
    }
    Ok(s.with_values(out))
}

fn lagged_dot(x: &[f64], y: &[f64], d: usize) -> f64 {
    x[..x.len() - d].iter().zip(&y[d..]).map(|(a, b)| a * b).sum()
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Normalised correlation between channel `i` and channel `j` delayed by
/// `d` frames. Negative delays swap the channels.
pub fn delayed_correlation(
    s: &ChannelSeries,
    i: usize,
    j: usize,
    d: i64,
) -> Result<f64, CoordError> {
    let frames = s.frames();
    if d.unsigned_abs() as usize >= frames {
        return Err(CoordError::DelayTooLarge { delay: d, frames });
    }
    let (a, b) = if d >= 0 { (i, j) } else { (j, i) };
    let (x, y) = (s.channel(a), s.channel(b));
    let norm = (energy(x) * energy(y)).sqrt();
    if norm == 0.0 {
        let name = if energy(x) == 0.0 { &s.names()[a] } else { &s.names()[b] };
        return Err(CoordError::DegenerateChannel(name.clone()));
    }
    Ok(lagged_dot(x, y, d.unsigned_abs() as usize) / norm)
}

/// Per-scale channel-delay matrices for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedCoordMatrix {
    pub k: usize,
    pub p: usize,
    pub scales: Vec<usize>,
    pub per_scale: Vec<DMatrix<f64>>,
}

impl StackedCoordMatrix {
    /// Wraps precomputed blocks, checking only that shapes agree.
    pub fn from_parts(
        k: usize,
        p: usize,
        scales: Vec<usize>,
        per_scale: Vec<DMatrix<f64>>,
    ) -> Result<Self, CoordError> {
        if per_scale.len() != scales.len() {
            return Err(CoordError::ShapeMismatch(format!(
                "{} matrices for {} scales",
                per_scale.len(),
                scales.len()
            )));
        }
        let dim = k * p;
        if let Some(m) = per_scale.iter().find(|m| m.shape() != (dim, dim)) {
            return Err(CoordError::ShapeMismatch(format!(
                "expected {dim}x{dim}, found {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { k, p, scales, per_scale })
    }

    pub fn dim(&self) -> usize {
        self.k * self.p
    }

    /// Vertical concatenation of the per-scale matrices in scale order.
    pub fn stacked(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim * self.per_scale.len(), dim);
        for (s, m) in self.per_scale.iter().enumerate() {
            out.view_mut((s * dim, 0), (dim, dim)).copy_from(m);
        }
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.k == other.k && self.p == other.p && self.scales == other.scales
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<(), CoordError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(CoordError::ShapeMismatch(format!(
                "K={} P={} scales={:?} vs K={} P={} scales={:?}",
                self.k, self.p, self.scales, other.k, other.p, other.scales
            )))
        }
    }

    /// Largest `|M - M^T|` entry over all scales.
    pub fn max_asymmetry(&self) -> f64 {
        self.per_scale
            .iter()
            .map(|m| (m - m.transpose()).amax())
            .fold(0.0, f64::max)
    }
}

/// Builds the per-scale matrices with the default executor.
pub fn build_stacked_matrix(
    s: &ChannelSeries,
    cfg: &CoordConfig,
) -> Result<StackedCoordMatrix, CoordError> {
    build_stacked_matrix_with(s, cfg, Exec::default())
}

pub fn build_stacked_matrix_with(
    s: &ChannelSeries,
    cfg: &CoordConfig,
    exec: Exec,
) -> Result<StackedCoordMatrix, CoordError> {
    cfg.validate()?;
    let frames = s.frames();
    let required = cfg.min_frames();
    if frames < required {
        return Err(CoordError::UtteranceTooShort { frames, required });
    }

    let owned;
    let series = if cfg.zscore {
        owned = z_score(s)?;
        &owned
    } else {
        for (name, ch) in s.names().iter().zip(s.values()) {
            if !(energy(ch) > 0.0) {
                return Err(CoordError::DegenerateChannel(name.clone()));
            }
        }
        s
    };

    let k = series.channels();
    let p = cfg.delays_per_scale;
    let norms: Vec<f64> = series.values().iter().map(|c| energy(c)).collect();

    // lags[scale][i * k + j][m] = r[i,j](scale * m)
    let jobs = cfg.scales.len() * k * k;
    let flat: Vec<Vec<f64>> = exec.map_range(jobs, |job| {
        let scale = cfg.scales[job / (k * k)];
        let (i, j) = ((job % (k * k)) / k, job % k);
        let denom = (norms[i] * norms[j]).sqrt();
        (0..p)
            .map(|m| lagged_dot(series.channel(i), series.channel(j), scale * m) / denom)
            .collect()
    });

    let dim = k * p;
    let per_scale = flat
        .chunks(k * k)
        .map(|lags| {
            DMatrix::from_fn(dim, dim, |row, col| {
                let (i, pi) = (row / p, row % p);
                let (j, qi) = (col / p, col % p);
                if qi >= pi {
                    lags[i * k + j][qi - pi]
                } else {
                    lags[j * k + i][pi - qi]
                }
            })
        })
        .collect();

    StackedCoordMatrix::from_parts(k, p, cfg.scales.clone(), per_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOrder {
    /// Descending by signed value.
    #[default]
    Signed,
    /// Descending by absolute value.
    Magnitude,
}

impl RankOrder {
    fn sort(self, v: &mut [f64]) {
        match self {
            RankOrder::Signed => v.sort_by(|a, b| b.total_cmp(a)),
            RankOrder::Magnitude => v.sort_by(|a, b| b.abs().total_cmp(&a.abs())),
        }
    }
}

/// Rank-ordered eigenvalues, one vector of length KP per delay scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenspectrum {
    pub k: usize,
    pub p: usize,
    pub scales: Vec<usize>,
    pub ordering: RankOrder,
    pub per_scale: Vec<Vec<f64>>,
}

impl Eigenspectrum {
    pub(crate) fn check_shape(&self, other: &Self) -> Result<(), CoordError> {
        if self.k == other.k
            && self.p == other.p
            && self.scales == other.scales
            && self.ordering == other.ordering
        {
            Ok(())
        } else {
            Err(CoordError::ShapeMismatch(format!(
                "spectra differ: K={} P={} scales={:?} {:?} vs K={} P={} scales={:?} {:?}",
                self.k,
                self.p,
                self.scales,
                self.ordering,
                other.k,
                other.p,
                other.scales,
                other.ordering
            )))
        }
    }

    /// Eigenvalues divided by KP, so each scale sums to one.
    pub fn normalized(&self) -> Self {
        let dim = (self.k * self.p) as f64;
        Self {
            per_scale: self
                .per_scale
                .iter()
                .map(|v| v.iter().map(|x| x / dim).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            per_scale: self
                .per_scale
                .iter()
                .zip(&other.per_scale)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// Eigenvalues of a single symmetric matrix, sorted per `ordering`.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>, ordering: RankOrder) -> Option<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ordering.sort(&mut v);
    Some(v)
}

pub fn eigenspectrum(m: &StackedCoordMatrix, ordering: RankOrder) -> Result<Eigenspectrum, CoordError> {
    let mut per_scale = Vec::with_capacity(m.per_scale.len());
    for (scale, mat) in m.scales.iter().zip(&m.per_scale) {
        let asymmetry = (mat - mat.transpose()).amax();
        if !(asymmetry <= SYMMETRY_TOL) {
            return Err(CoordError::NotSymmetric { scale: *scale, asymmetry });
        }
        let vals = symmetric_eigenvalues(mat, ordering)
            .ok_or(CoordError::ConvergenceFailure { scale: *scale })?;
        per_scale.push(vals);
    }
    Ok(Eigenspectrum { k: m.k, p: m.p, scales: m.scales.clone(), ordering, per_scale })
}

/// Element-wise mean at each rank and scale.
pub fn average_spectra(specs: &[Eigenspectrum]) -> Result<Eigenspectrum, CoordError> {
    let first = specs.first().ok_or(CoordError::EmptyGroup)?;
    let mut acc = first.clone();
    for s in &specs[1..] {
        first.check_shape(s)?;
        acc = acc.zip_with(s, |a, b| a + b);
    }
    let n = specs.len() as f64;
    acc.per_scale.iter_mut().flatten().for_each(|v| *v /= n);
    Ok(acc)
}

/// `group - reference` at each rank and scale.
pub fn difference_spectrum(
    group: &Eigenspectrum,
    reference: &Eigenspectrum,
) -> Result<Eigenspectrum, CoordError> {
    group.check_shape(reference)?;
    Ok(group.zip_with(reference, |a, b| a - b))
}

/// Matrix CSV: `# shape=RxC k=K p=P`, `# scales=...`, then the stacked rows.
pub fn matrix_to_csv(m: &StackedCoordMatrix) -> String {
    let st = m.stacked();
    let mut out = String::new();
    let _ = writeln!(out, "# shape={}x{} k={} p={}", st.nrows(), st.ncols(), m.k, m.p);
    let scales: Vec<String> = m.scales.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "# scales={}", scales.join(","));
    for r in 0..st.nrows() {
        let row: Vec<String> = st.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses the output of [`matrix_to_csv`].
pub fn matrix_from_csv(text: &str) -> Result<StackedCoordMatrix, CoordError> {
    let bad = |m: &str| CoordError::ShapeMismatch(m.to_string());
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| bad("empty matrix file"))?;
    let field = |key: &str| -> Result<&str, CoordError> {
        head.split_whitespace()
            .find_map(|t| t.strip_prefix(key))
            .ok_or_else(|| bad("malformed shape line"))
    };
    let k: usize = field("k=")?.parse().map_err(|_| bad("bad k"))?;
    let p: usize = field("p=")?.parse().map_err(|_| bad("bad p"))?;
    let scales: Vec<usize> = lines
        .next()
        .and_then(|l| l.strip_prefix("# scales="))
        .ok_or_else(|| bad("missing scales line"))?
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad("bad scale")))
        .collect::<Result<_, _>>()?;
    let dim = k * p;
    let values: Vec<f64> = lines
        .flat_map(|l| l.split(','))
        .filter(|c| !c.trim().is_empty())
        .map(|c| c.trim().parse::<f64>().map_err(|_| bad("non-numeric entry")))
        .collect::<Result<_, _>>()?;
    if values.len() != dim * dim * scales.len() {
        return Err(bad("entry count does not match header"));
    }
    let per_scale = values
        .chunks(dim * dim)
        .map(|c| DMatrix::from_row_slice(dim, dim, c))
        .collect();
    StackedCoordMatrix::from_parts(k, p, scales, per_scale)
}

/// Long-format spectrum CSV with 1-based ranks.
pub fn spectrum_to_csv(s: &Eigenspectrum) -> String {
    let mut out = String::from("scale,rank,value\n");
    for (scale, vals) in s.scales.iter().zip(&s.per_scale) {
        for (r, v) in vals.iter().enumerate() {
            let _ = writeln!(out, "{scale},{},{v}", r + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(k: usize, t: usize, seed: u64) -> ChannelSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..k).map(|_| (0..t).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        ChannelSeries::unnamed(v, 100.0).unwrap()
    }

    #[test]
    fn zscore_basic_and_idempotent() {
        let s = ChannelSeries::unnamed(vec![vec![1.0, 2.0, 3.0], vec![0.0, 5.0, 1.0]], 100.0).unwrap();
        let z = z_score(&s).unwrap();
        let (m, sd) = mean_std(z.channel(0));
        assert!(m.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        let zz = z_score(&z).unwrap();
        for k in 0..2 {
            for (a, b) in z.channel(k).iter().zip(zz.channel(k)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zscore_rejects_constant() {
        let s = ChannelSeries::unnamed(vec![vec![2.0; 5], vec![0.0, 1.0, 0.0, 1.0, 0.0]], 100.0).unwrap();
        assert!(matches!(z_score(&s), Err(CoordError::DegenerateChannel(n)) if n == "c0"));
    }

    #[test]
    fn self_correlation_at_zero_is_exactly_one() {
        let s = random_series(3, 200, 9);
        for i in 0..3 {
            assert_eq!(delayed_correlation(&s, i, i, 0).unwrap(), 1.0);
        }
    }

    #[test]
    fn alternating_sequence() {
        let x = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let s = ChannelSeries::unnamed(vec![x.clone(), x], 100.0).unwrap();
        let r = delayed_correlation(&s, 0, 0, 1).unwrap();
        assert!((r + 5.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            delayed_correlation(&s, 0, 1, -6),
            Err(CoordError::DelayTooLarge { .. })
        ));
    }

    #[test]
    fn negative_delay_swaps_channels() {
        let s = random_series(2, 100, 4);
        let a = delayed_correlation(&s, 0, 1, -7).unwrap();
        let b = delayed_correlation(&s, 1, 0, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_short_reports_minimum() {
        let s = random_series(2, 73, 1);
        match build_stacked_matrix(&s, &CoordConfig::default()) {
            Err(CoordError::UtteranceTooShort { frames, required }) => {
                assert_eq!((frames, required), (73, 74))
            }
            other => panic!("{other:?}"),
        }
        assert!(build_stacked_matrix(&random_series(2, 74, 1), &CoordConfig::default()).is_ok());
    }

    #[test]
    fn config_validation() {
        let bad = CoordConfig { scales: vec![3, 1], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = CoordConfig { delays_per_scale: 1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sequential_and_parallel_builds_agree() {
        let s = random_series(4, 300, 2);
        let cfg = CoordConfig::default();
        let a = build_stacked_matrix_with(&s, &cfg, Exec::Sequential).unwrap();
        let b = build_stacked_matrix_with(&s, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_spectrum() {
        let m = StackedCoordMatrix::from_parts(2, 3, vec![1], vec![DMatrix::identity(6, 6)]).unwrap();
        let e = eigenspectrum(&m, RankOrder::Signed).unwrap();
        for v in &e.per_scale[0] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn magnitude_ordering() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -2.0, 1.0]));
        assert_eq!(symmetric_eigenvalues(&m, RankOrder::Signed).unwrap(), vec![1.0, 0.5, -2.0]);
        assert_eq!(symmetric_eigenvalues(&m, RankOrder::Magnitude).unwrap(), vec![-2.0, 1.0, 0.5]);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut a = DMatrix::identity(4, 4);
        a[(0, 1)] = 0.5;
        let m = StackedCoordMatrix::from_parts(2, 2, vec![1], vec![a]).unwrap();
        assert!(matches!(eigenspectrum(&m, RankOrder::Signed), Err(CoordError::NotSymmetric { .. })));
    }

    #[test]
    fn averaging_and_differences() {
        let mk = |v: f64| Eigenspectrum {
            k: 1,
            p: 2,
            scales: vec![1],
            ordering: RankOrder::Signed,
            per_scale: vec![vec![v, 0.0]],
        };
        assert_eq!(average_spectra(&[mk(2.0)]).unwrap(), mk(2.0));
        assert_eq!(average_spectra(&[mk(2.0), mk(4.0)]).unwrap().per_scale[0][0], 3.0);
        assert_eq!(difference_spectrum(&mk(2.0), &mk(2.0)).unwrap().per_scale, vec![vec![0.0, 0.0]]);
        let mut other = mk(1.0);
        other.p = 3;
        assert!(matches!(average_spectra(&[mk(1.0), other]), Err(CoordError::ShapeMismatch(_))));
        assert!(matches!(average_spectra(&[]), Err(CoordError::EmptyGroup)));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = build_stacked_matrix(&random_series(2, 120, 5), &CoordConfig::default()).unwrap();
        let text = matrix_to_csv(&m);
        assert!(text.starts_with("# shape=80x20 k=2 p=10\n# scales=1,3,5,7\n"));
        assert_eq!(matrix_from_csv(&text).unwrap(), m);
    }

    #[test]
    fn spectrum_csv_layout() {
        let m = build_stacked_matrix(&random_series(2, 120, 5), &CoordConfig::default()).unwrap();
        let e = eigenspectrum(&m, RankOrder::Signed).unwrap();
        let text = spectrum_to_csv(&e);
        assert_eq!(text.lines().count(), 1 + 4 * 20);
        assert!(text.lines().nth(1).unwrap().starts_with("1,1,"));
    }
}
