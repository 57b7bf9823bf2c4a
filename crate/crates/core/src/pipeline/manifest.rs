//! Corpus manifest: one CSV row per utterance.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::PipelineError;

pub const MANIFEST_COLUMNS: [&str; 9] = [
    "utterance_id",
    "wav_path",
    "tv_path",
    "textgrid_path",
    "speaker_id",
    "l1",
    "gender",
    "group",
    "prompt_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Gender {
    M,
    F,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::M => "M",
            Gender::F => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Native,
    Accent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub wav_path: Option<PathBuf>,
    pub tv_path: Option<PathBuf>,
    pub textgrid_path: Option<PathBuf>,
    pub speaker_id: String,
    pub l1: String,
    pub gender: Gender,
    pub group: Group,
    pub prompt_id: Option<String>,
}

/// A manifest row that failed validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    /// 1-based data row number.
    pub row: usize,
    pub utterance_id: Option<String>,
    pub reason: String,
}

impl RejectedRow {
    pub fn label(&self) -> String {
        self.utterance_id.clone().unwrap_or_else(|| format!("row:{}", self.row))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    /// Valid records, sorted by utterance id.
    pub records: Vec<UtteranceRecord>,
    pub rejected: Vec<RejectedRow>,
    /// Referenced files that do not exist (records are kept).
    pub dangling: Vec<(String, PathBuf)>,
}

fn resolve(base: &Path, cell: &str) -> Option<PathBuf> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    let p = Path::new(cell);
    Some(if p.is_absolute() { p.to_path_buf() } else { base.join(p) })
}

fn is_english(l1: &str) -> bool {
    l1.trim().eq_ignore_ascii_case("english")
}

/// Reads and validates a manifest. Relative paths resolve against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Manifest, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| PipelineError::Manifest(e.to_string()))?.clone();
    let mut col = [0usize; MANIFEST_COLUMNS.len()];
    for (slot, name) in col.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PipelineError::MissingColumn(name.to_string()))?;
    }

    let mut manifest = Manifest::default();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| PipelineError::Manifest(format!("row {row_no}: {e}")))?;
        let cell = |c: usize| row.get(col[c]).unwrap_or("").trim().to_string();
        let id = cell(0);
        let reject = |reason: &str| RejectedRow {
            row: row_no,
            utterance_id: (!id.is_empty()).then(|| id.clone()),
            reason: reason.to_string(),
        };
        if id.is_empty() {
            manifest.rejected.push(reject("empty utterance_id"));
            continue;
        }
        if !seen.insert(id.clone()) {
            return Err(PipelineError::DuplicateId(id));
        }
        let wav_path = resolve(base, &cell(1));
        let tv_path = resolve(base, &cell(2));
        let textgrid_path = resolve(base, &cell(3));
        if wav_path.is_none() && tv_path.is_none() {
            manifest.rejected.push(reject("neither wav_path nor tv_path given"));
            continue;
        }
        let gender = match cell(6).to_ascii_uppercase().as_str() {
            "M" => Gender::M,
            "F" => Gender::F,
            other => {
                manifest.rejected.push(reject(&format!("gender must be M or F, got {other:?}")));
                continue;
            }
        };
        let group = match cell(7).to_ascii_lowercase().as_str() {
            "native" => Group::Native,
            "accent" => Group::Accent,
            other => {
                manifest.rejected.push(reject(&format!("group must be native or accent, got {other:?}")));
                continue;
            }
        };
        let l1 = cell(5);
        if l1.is_empty() {
            manifest.rejected.push(reject("empty l1"));
            continue;
        }
        if group == Group::Accent && is_english(&l1) {
            manifest.rejected.push(reject("accent group requires a non-English l1"));
            continue;
        }
        for p in [&wav_path, &tv_path, &textgrid_path].into_iter().flatten() {
            if !p.exists() {
                manifest.dangling.push((id.clone(), p.clone()));
            }
        }
        let prompt = cell(8);
        manifest.records.push(UtteranceRecord {
            utterance_id: id.clone(),
            wav_path,
            tv_path,
            textgrid_path,
            speaker_id: cell(4),
            l1,
            gender,
            group,
            prompt_id: (!prompt.is_empty()).then_some(prompt),
        });
    }
    manifest.records.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    Ok(manifest)
}

/// Writes a manifest in the canonical column order. Paths are written as
/// given.
pub fn manifest_to_csv(records: &[UtteranceRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(MANIFEST_COLUMNS);
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    for r in records {
        let _ = w.write_record([
            r.utterance_id.clone(),
            path(&r.wav_path),
            path(&r.tv_path),
            path(&r.textgrid_path),
            r.speaker_id.clone(),
            r.l1.clone(),
            r.gender.to_string(),
            match r.group {
                Group::Native => "native".into(),
                Group::Accent => "accent".into(),
            },
            r.prompt_id.clone().unwrap_or_default(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "utterance_id,wav_path,tv_path,textgrid_path,speaker_id,l1,gender,group,prompt_id\n";

    #[test]
    fn three_rows() {
        let text = format!(
            "{HEADER}u1,,a.csv,,s1,English,M,native,p1\nu3,x.wav,,,s2,Korean,F,accent,p1\nu2,,b.csv,g.TextGrid,s2,Korean,F,accent,\n"
        );
        let m = parse_manifest(&text, Path::new("/data")).unwrap();
        assert_eq!(m.records.len(), 3);
        assert_eq!(m.records[0].utterance_id, "u1");
        assert_eq!(m.records[1].utterance_id, "u2");
        assert_eq!(m.records[1].prompt_id, None);
        assert_eq!(m.records[0].tv_path.as_deref(), Some(Path::new("/data/a.csv")));
        // none of the referenced files exist
        assert_eq!(m.dangling.len(), 4);
    }

    #[test]
    fn duplicate_id_is_fatal() {
        let text = format!("{HEADER}u1,,a.csv,,s1,English,M,native,\nu1,,b.csv,,s1,English,M,native,\n");
        assert!(matches!(
            parse_manifest(&text, Path::new(".")),
            Err(PipelineError::DuplicateId(id)) if id == "u1"
        ));
    }

    #[test]
    fn missing_column() {
        let text = "utterance_id,wav_path,tv_path,speaker_id,l1,gender,group,prompt_id\n";
        assert!(matches!(
            parse_manifest(text, Path::new(".")),
            Err(PipelineError::MissingColumn(c)) if c == "textgrid_path"
        ));
    }

    #[test]
    fn rejects_rows_with_reasons() {
        let text = format!(
            "{HEADER}u1,,,,s1,English,M,native,\nu2,,a.csv,,s1,English,M,accent,\nu3,,a.csv,,s1,Hindi,X,accent,\nu4,,a.csv,,s1,Hindi,F,accent,\n"
        );
        let m = parse_manifest(&text, Path::new(".")).unwrap();
        assert_eq!(m.records.len(), 1);
        let reasons: Vec<_> = m.rejected.iter().map(|r| (r.label(), r.reason.clone())).collect();
        assert_eq!(reasons[0], ("u1".into(), "neither wav_path nor tv_path given".into()));
        assert!(reasons[1].1.contains("non-English"));
        assert!(reasons[2].1.contains("gender"));
    }

    #[test]
    fn csv_round_trip() {
        let text = format!("{HEADER}u1,/a.wav,/a.csv,,s1,English,M,native,p1\n");
        let m = parse_manifest(&text, Path::new("/")).unwrap();
        assert_eq!(manifest_to_csv(&m.records), text);
    }
}
