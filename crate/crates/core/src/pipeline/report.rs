use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::manifest::Gender;
use super::run::RunSummary;
use super::{slug, write_atomic, PipelineError};
use crate::coord::Eigenspectrum;

/// One row of `pitch_by_group.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchRow {
    pub l1: String,
    pub gender: Gender,
    /// Speakers with at least one voiced frame.
    pub n_speakers: usize,
    pub mean_pitch_hz: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn spectrum_files(
    dir: &Path,
    label: &str,
    feature: &str,
    spec: &Eigenspectrum,
    column: &str,
    files: &mut Vec<PathBuf>,
) -> Result<(), PipelineError> {
    for (scale, vals) in spec.scales.iter().zip(&spec.per_scale) {
        let mut body = format!("rank,{column}\n");
        for (r, v) in vals.iter().enumerate() {
            let _ = writeln!(body, "{},{v}", r + 1);
        }
        let path = dir.join(format!("{}_{feature}_{scale}.csv", slug(label)));
        write_atomic(&path, body.as_bytes())?;
        files.push(path);
    }
    Ok(())
}

/// Writes the report files for the stages recorded in `summary` and
/// returns their paths, sorted.
pub fn emit_reports(summary: &RunSummary, output_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    let put = |name: &str, body: String, files: &mut Vec<PathBuf>| -> Result<(), PipelineError> {
        let path = output_dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        files.push(path);
        Ok(())
    };

    let mut log = String::new();
    for e in &summary.log {
        let line = serde_json::to_string(e).map_err(|e| PipelineError::Io(e.to_string()))?;
        log.push_str(&line);
        log.push('\n');
    }
    put("run_log.jsonl", log, &mut files)?;
    let mut warnings = String::new();
    for w in &summary.warnings {
        warnings.push_str(w);
        warnings.push('\n');
    }
    put("warnings.txt", warnings, &mut files)?;

    if summary.stages.pitch {
        let mut body = String::from("l1,gender,n_speakers,mean_pitch_hz\n");
        for r in &summary.pitch {
            let _ = writeln!(body, "{},{},{},{}", csv_field(&r.l1), r.gender, r.n_speakers, opt(r.mean_pitch_hz));
        }
        put("pitch_by_group.csv", body, &mut files)?;
    }

    if summary.stages.strength {
        let mut body = String::from("accent,articulatory_score,acoustic_score,levenshtein_mean,n_utterances\n");
        for s in &summary.strength {
            let _ = writeln!(
                body,
                "{},{},{},{},{}",
                csv_field(&s.accent),
                opt(s.articulatory),
                opt(s.acoustic),
                opt(s.levenshtein_mean),
                s.n_utterances
            );
        }
        put("accent_strength.csv", body, &mut files)?;

        let mut body = String::from("accent,mean,normalized_mean,utterances\n");
        for (accent, l) in &summary.levenshtein {
            let _ = writeln!(body, "{},{},{},{}", csv_field(accent), l.mean, opt(l.normalized_mean), l.utterances);
        }
        put("levenshtein.csv", body, &mut files)?;
    }

    if summary.stages.group_spectra {
        for ((label, feature), (spec, _)) in &summary.group_spectra {
            spectrum_files(&output_dir.join("eigenspectra"), label, feature.name(), spec, "value", &mut files)?;
            spectrum_files(
                &output_dir.join("eigenspectra_normalized"),
                label,
                feature.name(),
                &spec.normalized(),
                "value",
                &mut files,
            )?;
        }
        for ((label, feature), spec) in &summary.diff_spectra {
            spectrum_files(&output_dir.join("diffspectra"), label, feature.name(), spec, "delta", &mut files)?;
        }
    }

    files.sort();
    Ok(files)
}
