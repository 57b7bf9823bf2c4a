//! Phonetic annotations and the edit-distance accent baseline.

mod edit;
mod textgrid;

use thiserror::Error;

pub use edit::{accent_levenshtein, levenshtein, LevenshteinStats};
pub use textgrid::{
    decode_text, parse_textgrid, read_textgrid, to_long_text, Interval, TextGrid, TextGridError,
    Tier,
};

pub const DEFAULT_TIER: &str = "phones";

/// Alignment labels that mark silence rather than a phone.
const SILENCE: [&str; 4] = ["", "sil", "sp", "spn"];

#[derive(Debug, Error, PartialEq)]
pub enum TranscriptionError {
    #[error("tier {0:?} not found")]
    TierNotFound(String),
    #[error("malformed error tag in interval {index}: {label:?}")]
    MalformedTag { index: usize, label: String },
    #[error("empty group")]
    EmptyGroup,
    #[error(transparent)]
    TextGrid(#[from] TextGridError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub additions: usize,
}

impl ErrorCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.additions
    }
}

/// Canonical (expected) and perceived (produced) phone sequences of one
/// utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhonePair {
    pub canonical: Vec<String>,
    pub perceived: Vec<String>,
    pub errors: ErrorCounts,
}

fn is_silence(label: &str) -> bool {
    SILENCE.iter().any(|s| s.eq_ignore_ascii_case(label))
}

/// Builds the phone pair from a tier. Untagged labels are correct phones.
/// Tagged labels read `produced,canonical,tag` with tag `s` (substitution),
/// `d` (canonical phone deleted) or `a` (phone added).
pub fn extract_phone_pair(grid: &TextGrid, tier_name: &str) -> Result<PhonePair, TranscriptionError> {
    let tier = grid
        .tier(tier_name)
        .ok_or_else(|| TranscriptionError::TierNotFound(tier_name.to_string()))?;
    let mut pair = PhonePair::default();
    for (index, iv) in tier.intervals.iter().enumerate() {
        let label = iv.label.trim();
        if !label.contains(',') {
            if !is_silence(label) {
                pair.canonical.push(label.to_string());
                pair.perceived.push(label.to_string());
            }
            continue;
        }
        let malformed = || TranscriptionError::MalformedTag { index, label: iv.label.clone() };
        let fields: Vec<&str> = label.split(',').map(str::trim).collect();
        let [produced, canonical, tag] = fields[..] else { return Err(malformed()) };
        let present = |s: &str| !s.is_empty() && !is_silence(s);
        match tag.to_ascii_lowercase().as_str() {
            "s" if present(produced) && present(canonical) => {
                pair.canonical.push(canonical.to_string());
                pair.perceived.push(produced.to_string());
                pair.errors.substitutions += 1;
            }
            "d" if present(canonical) => {
                pair.canonical.push(canonical.to_string());
                pair.errors.deletions += 1;
            }
            "a" if present(produced) => {
                pair.perceived.push(produced.to_string());
                pair.errors.additions += 1;
            }
            _ => return Err(malformed()),
        }
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(labels: &[&str]) -> TextGrid {
        let intervals = labels
            .iter()
            .enumerate()
            .map(|(i, l)| Interval { xmin: i as f64, xmax: i as f64 + 1.0, label: l.to_string() })
            .collect();
        TextGrid {
            xmin: 0.0,
            xmax: labels.len() as f64,
            tiers: vec![Tier { name: "phones".into(), intervals }],
            skipped_tiers: vec![],
        }
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn substitution() {
        let p = extract_phone_pair(&grid(&["DH", "AH", "B, P, s"]), "phones").unwrap();
        assert_eq!(p.canonical, strings(&["DH", "AH", "P"]));
        assert_eq!(p.perceived, strings(&["DH", "AH", "B"]));
        assert_eq!(p.errors, ErrorCounts { substitutions: 1, deletions: 0, additions: 0 });
    }

    #[test]
    fn addition_and_deletion() {
        let p = extract_phone_pair(&grid(&["K", "T, , a", "AE"]), "phones").unwrap();
        assert_eq!(p.canonical, strings(&["K", "AE"]));
        assert_eq!(p.perceived, strings(&["K", "T", "AE"]));
        assert_eq!(p.errors.additions, 1);

        let p = extract_phone_pair(&grid(&["K", "sil, T, d", "AE"]), "phones").unwrap();
        assert_eq!(p.canonical, strings(&["K", "T", "AE"]));
        assert_eq!(p.perceived, strings(&["K", "AE"]));
        assert_eq!(p.errors.deletions, 1);
    }

    #[test]
    fn untagged_and_silence() {
        let labels = ["sil", "HH", "AH", "L", "OW", "sp", "W", "ER", "L", "D", "", "Z", "spn"];
        let p = extract_phone_pair(&grid(&labels), "phones").unwrap();
        assert_eq!(p.canonical.len(), 9);
        assert_eq!(p.canonical, p.perceived);
        assert_eq!(p.errors.total(), 0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            extract_phone_pair(&grid(&["A"]), "words"),
            Err(TranscriptionError::TierNotFound("words".into()))
        );
        for bad in ["B, P", "B, P, x", ", P, s", "B, , d"] {
            assert!(matches!(
                extract_phone_pair(&grid(&["A", bad]), "phones"),
                Err(TranscriptionError::MalformedTag { index: 1, .. })
            ));
        }
    }
}
