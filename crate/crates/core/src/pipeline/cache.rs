//! On-disk MFCC/pitch cache keyed by audio content and extraction config.
//! Entries are TV-CSV files, so a cached value parses back bit-identically.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::write_atomic;
use crate::acoustic::{MfccConfig, PitchConfig, PitchTrack};
use crate::series::{parse_tv_csv, to_tv_csv, ChannelSeries};

const FORMAT_VERSION: &str = "features-v1";

pub(crate) struct FeatureCache {
    dir: PathBuf,
    config_hash: String,
}

impl FeatureCache {
    pub(crate) fn new(dir: PathBuf, mfcc: &MfccConfig, pitch: &PitchConfig) -> Self {
        let cfg = serde_json::json!({ "version": FORMAT_VERSION, "mfcc": mfcc, "pitch": pitch });
        let config_hash = hex::encode(Sha256::digest(cfg.to_string().as_bytes()));
        Self { dir, config_hash }
    }

    pub(crate) fn key(&self, audio: &[u8]) -> String {
        let content = hex::encode(Sha256::digest(audio));
        hex::encode(Sha256::digest(format!("{content}:{}", self.config_hash).as_bytes()))
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.mfcc.csv")), self.dir.join(format!("{key}.pitch.csv")))
    }

    pub(crate) fn load(&self, key: &str) -> Option<(ChannelSeries, PitchTrack)> {
        let (m, p) = self.paths(key);
        let mfcc = parse_tv_csv(&std::fs::read_to_string(m).ok()?, None, 100.0).ok()?;
        let pitch = pitch_from_series(&parse_tv_csv(&std::fs::read_to_string(p).ok()?, Some(&["f0", "voiced_prob"]), 100.0).ok()?);
        Some((mfcc, pitch))
    }

    pub(crate) fn store(&self, key: &str, mfcc: &ChannelSeries, pitch: &PitchTrack) {
        let (m, p) = self.paths(key);
        let result = write_atomic(&m, to_tv_csv(mfcc).as_bytes()).and_then(|_| match pitch_to_series(pitch) {
            Some(s) => write_atomic(&p, to_tv_csv(&s).as_bytes()),
            None => Ok(()),
        });
        if let Err(e) = result {
            log::warn!("feature cache write failed: {e}");
        }
    }
}

pub(crate) fn pitch_to_series(track: &PitchTrack) -> Option<ChannelSeries> {
    ChannelSeries::new(
        vec![track.f0.clone(), track.voiced_prob.clone()],
        vec!["f0".into(), "voiced_prob".into()],
        track.frame_rate,
    )
    .ok()
}

fn pitch_from_series(s: &ChannelSeries) -> PitchTrack {
    PitchTrack { f0: s.channel(0).to_vec(), voiced_prob: s.channel(1).to_vec(), frame_rate: s.frame_rate() }
}

pub(crate) fn write_features(dir: &Path, stem: &str, mfcc: &ChannelSeries, pitch: &PitchTrack) -> Result<(), super::PipelineError> {
    write_atomic(&dir.join(format!("{stem}.mfcc.csv")), to_tv_csv(mfcc).as_bytes())?;
    if let Some(s) = pitch_to_series(pitch) {
        write_atomic(&dir.join(format!("{stem}.pitch.csv")), to_tv_csv(&s).as_bytes())?;
    }
    Ok(())
}
