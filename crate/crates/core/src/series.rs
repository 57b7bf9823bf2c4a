//! Multichannel feature trajectories and the TV-CSV exchange format.
//!
//! A TV-CSV file is a header line of channel names followed by one line of
//! comma-separated values per frame. An optional `#frame_rate=<float>`
//! line before the header overrides the caller's default frame rate.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

/// The six vocal tract variables produced by speech inversion: lip aperture,
/// lip protrusion, tongue tip constriction degree/location and tongue body
/// constriction degree/location.
pub const TV_CHANNELS: [&str; 6] = ["LA", "LP", "TTCD", "TTCL", "TBCD", "TBCL"];

pub const DEFAULT_FRAME_RATE: f64 = 100.0;
pub const DEFAULT_DEGENERACY_EPS: f64 = 1e-8;

const FRAME_RATE_PREFIX: &str = "#frame_rate=";

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("missing channel {0}")]
    MissingChannel(String),
    #[error("row {row}: expected {expected} values, found {found}")]
    RowLengthMismatch { row: usize, expected: usize, found: usize },
    #[error("non-numeric cell at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize },
    #[error("duplicate channel name {0}")]
    DuplicateChannel(String),
    #[error("invalid frame rate line: {0}")]
    BadFrameRate(String),
    #[error("series needs at least 2 channels and 2 frames (got {channels} x {frames})")]
    TooSmall { channels: usize, frames: usize },
    #[error("channel {channel} has {found} frames, expected {expected}")]
    RaggedChannels { channel: usize, expected: usize, found: usize },
    #[error("file has no header line")]
    NoHeader,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// K channels by T frames, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSeries {
    values: Vec<Vec<f64>>,
    names: Vec<String>,
    frame_rate: f64,
}

impl ChannelSeries {
    pub fn new(
        values: Vec<Vec<f64>>,
        names: Vec<String>,
        frame_rate: f64,
    ) -> Result<Self, SeriesError> {
        let frames = values.first().map_or(0, Vec::len);
        if values.len() < 2 || frames < 2 {
            return Err(SeriesError::TooSmall { channels: values.len(), frames });
        }
        for (i, ch) in values.iter().enumerate() {
            if ch.len() != frames {
                return Err(SeriesError::RaggedChannels {
                    channel: i,
                    expected: frames,
                    found: ch.len(),
                });
            }
        }
        if names.len() != values.len() {
            return Err(SeriesError::RowLengthMismatch {
                row: 0,
                expected: values.len(),
                found: names.len(),
            });
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(SeriesError::DuplicateChannel(n.clone()));
            }
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(SeriesError::BadFrameRate(frame_rate.to_string()));
        }
        Ok(Self { values, names, frame_rate })
    }

    /// Builds a series with names `c0`, `c1`, ...
    pub fn unnamed(values: Vec<Vec<f64>>, frame_rate: f64) -> Result<Self, SeriesError> {
        let names = (0..values.len()).map(|i| format!("c{i}")).collect();
        Self::new(values, names, frame_rate)
    }

    pub fn channels(&self) -> usize {
        self.values.len()
    }

    pub fn frames(&self) -> usize {
        self.values[0].len()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec<f64>> {
        self.values
    }

    /// Same names and frame rate, new values of identical shape.
    pub(crate) fn with_values(&self, values: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { values, names: self.names.clone(), frame_rate: self.frame_rate }
    }

    /// Reorders channels to `order`, erroring on any name not present.
    pub fn select(&self, order: &[&str]) -> Result<Self, SeriesError> {
        let mut values = Vec::with_capacity(order.len());
        for want in order {
            let idx = self
                .names
                .iter()
                .position(|n| n == want)
                .ok_or_else(|| SeriesError::MissingChannel(want.to_string()))?;
            values.push(self.values[idx].clone());
        }
        Self::new(values, order.iter().map(|s| s.to_string()).collect(), self.frame_rate)
    }
}

/// Per-channel population mean and standard deviation over finite values.
pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in x.iter().filter(|v| v.is_finite()) {
        n += 1;
        sum += v;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    let var = x
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub degenerate_channels: Vec<(String, f64)>,
    pub nan_count: usize,
    pub length_frames: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.degenerate_channels.is_empty() && self.nan_count == 0
    }
}

/// Reports channels whose standard deviation is below `eps` and counts
/// non-finite entries.
pub fn validate_series(s: &ChannelSeries, eps: f64) -> ValidationReport {
    let mut degenerate = Vec::new();
    let mut nan_count = 0;
    for (name, ch) in s.names.iter().zip(&s.values) {
        nan_count += ch.iter().filter(|v| !v.is_finite()).count();
        let (_, std) = mean_std(ch);
        if std < eps {
            degenerate.push((name.clone(), std));
        }
    }
    ValidationReport { degenerate_channels: degenerate, nan_count, length_frames: s.frames() }
}

/// Parses TV-CSV text. With `expected` set, the result holds exactly those
/// channels in that order; otherwise all file columns in file order.
/// Row and column numbers in errors are 1-based, counting data rows only.
pub fn parse_tv_csv(
    text: &str,
    expected: Option<&[&str]>,
    default_frame_rate: f64,
) -> Result<ChannelSeries, SeriesError> {
    let mut frame_rate = default_frame_rate;
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));

    let header = loop {
        match lines.next() {
            None => return Err(SeriesError::NoHeader),
            Some(l) if l.trim().is_empty() => continue,
            Some(l) if l.starts_with(FRAME_RATE_PREFIX) => {
                let v = l[FRAME_RATE_PREFIX.len()..].trim();
                frame_rate = v
                    .parse::<f64>()
                    .ok()
                    .filter(|r| r.is_finite() && *r > 0.0)
                    .ok_or_else(|| SeriesError::BadFrameRate(l.to_string()))?;
            }
            Some(l) => break l,
        }
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();

    let picks: Vec<usize> = match expected {
        Some(want) => want
            .iter()
            .map(|w| {
                names
                    .iter()
                    .position(|n| n == w)
                    .ok_or_else(|| SeriesError::MissingChannel(w.to_string()))
            })
            .collect::<Result<_, _>>()?,
        None => (0..names.len()).collect(),
    };

    let mut values = vec![Vec::new(); picks.len()];
    let mut row = 0;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return Err(SeriesError::RowLengthMismatch {
                row,
                expected: names.len(),
                found: cells.len(),
            });
        }
        for (out, &col) in values.iter_mut().zip(&picks) {
            let v = cells[col]
                .trim()
                .parse::<f64>()
                .map_err(|_| SeriesError::NonNumericCell { row, col: col + 1 })?;
            out.push(v);
        }
        // cells outside the selection must still be numeric
        for (col, cell) in cells.iter().enumerate() {
            if !picks.contains(&col) && cell.trim().parse::<f64>().is_err() {
                return Err(SeriesError::NonNumericCell { row, col: col + 1 });
            }
        }
    }

    let out_names = picks.iter().map(|&i| names[i].clone()).collect();
    ChannelSeries::new(values, out_names, frame_rate)
}

/// Loads a TV trajectory file, keeping exactly `expected_channels` in the
/// given order.
pub fn load_tv_series(
    path: &Path,
    expected_channels: &[&str],
    default_frame_rate: f64,
) -> Result<ChannelSeries, SeriesError> {
    let text = fs::read_to_string(path)?;
    parse_tv_csv(&text, Some(expected_channels), default_frame_rate)
}

/// Serialises a series as TV-CSV. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn to_tv_csv(s: &ChannelSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FRAME_RATE_PREFIX}{}", s.frame_rate);
    out.push_str(&s.names.join(","));
    out.push('\n');
    for t in 0..s.frames() {
        for k in 0..s.channels() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", s.values[k][t]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv_text(rows: usize) -> String {
        let mut s = String::from("LA,LP,TTCD,TTCL,TBCD,TBCL\n");
        for t in 0..rows {
            let row: Vec<String> = (0..6).map(|k| format!("{}", (t * 7 + k) as f64 * 0.01)).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_six_tvs() {
        let s = parse_tv_csv(&tv_text(300), Some(&TV_CHANNELS), DEFAULT_FRAME_RATE).unwrap();
        assert_eq!((s.channels(), s.frames()), (6, 300));
        assert_eq!(s.frame_rate(), 100.0);
    }

    #[test]
    fn missing_channel_is_named() {
        let text = "LA,LP,TTCD,TTCL,TBCD\n1,2,3,4,5\n2,3,4,5,6\n";
        match parse_tv_csv(text, Some(&TV_CHANNELS), 100.0) {
            Err(SeriesError::MissingChannel(c)) => assert_eq!(c, "TBCL"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_position() {
        let mut text = tv_text(6);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[5].split(',').map(String::from).collect();
        cells[1] = "abc".into();
        lines[5] = cells.join(",");
        text = lines.join("\n");
        match parse_tv_csv(&text, Some(&TV_CHANNELS), 100.0) {
            Err(SeriesError::NonNumericCell { row, col }) => assert_eq!((row, col), (5, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_row() {
        let text = "a,b\n1,2\n3\n";
        assert!(matches!(
            parse_tv_csv(text, None, 100.0),
            Err(SeriesError::RowLengthMismatch { row: 2, .. })
        ));
    }

    #[test]
    fn reorders_to_expected_and_reads_sidecar_rate() {
        let text = "#frame_rate=200\r\nTBCL,LA,LP,TTCD,TTCL,TBCD\r\n6,1,2,3,4,5\r\n7,2,3,4,5,6\r\n";
        let s = parse_tv_csv(text, Some(&TV_CHANNELS), 100.0).unwrap();
        assert_eq!(s.frame_rate(), 200.0);
        assert_eq!(s.names(), &TV_CHANNELS.map(String::from));
        assert_eq!(s.channel(0), &[1.0, 2.0]);
        assert_eq!(s.channel(5), &[6.0, 7.0]);
    }

    #[test]
    fn validation_reports() {
        let s = ChannelSeries::unnamed(vec![vec![3.2; 50], (0..50).map(|x| x as f64).collect()], 100.0)
            .unwrap();
        let r = validate_series(&s, DEFAULT_DEGENERACY_EPS);
        assert_eq!(r.degenerate_channels.len(), 1);
        assert_eq!(r.degenerate_channels[0].0, "c0");
        assert!(r.degenerate_channels[0].1 < 1e-12);
        assert_eq!(r.nan_count, 0);
        assert_eq!(r.length_frames, 50);

        let mut v = s.values().to_vec();
        v[0] = (0..50).map(|x| (x as f64).sin()).collect();
        v[1][7] = f64::NAN;
        let r = validate_series(&s.with_values(v), DEFAULT_DEGENERACY_EPS);
        assert!(r.degenerate_channels.is_empty());
        assert_eq!(r.nan_count, 1);
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = ChannelSeries::new(vec![vec![0.0; 3]; 2], vec!["a".into(), "a".into()], 100.0);
        assert!(matches!(r, Err(SeriesError::DuplicateChannel(_))));
    }
}
