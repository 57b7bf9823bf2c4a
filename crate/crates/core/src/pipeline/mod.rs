//! Manifest-driven corpus runs.
//!
//! Utterances are processed on a bounded worker pool in chunks; results are
//! folded into group aggregates on the calling thread in utterance-id order,
//! so report files are byte-identical for any worker count.

mod cache;
mod config;
mod fixtures;
mod manifest;
mod report;
mod run;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use config::{NativeReference, RunConfig, Stages};
pub use fixtures::{synthetic_group, write_synthetic_corpus, CorpusOptions, SyntheticUtterance};
pub use manifest::{
    load_manifest, manifest_to_csv, parse_manifest, Gender, Group, Manifest, RejectedRow,
    UtteranceRecord, MANIFEST_COLUMNS,
};
pub use report::{emit_reports, PitchRow};
pub use run::{run_pipeline, Feature, LogEntry, RunSummary, Status};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("manifest is missing column {0}")]
    MissingColumn(String),
    #[error("duplicate utterance_id {0}")]
    DuplicateId(String),
    #[error("manifest has no valid records")]
    EmptyManifest,
    #[error("accent utterances present but no native reference utterances")]
    NoNativeReference,
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Writes via a temporary file in the destination directory and renames it
/// into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// File-name-safe form of a label.
pub(crate) fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}
