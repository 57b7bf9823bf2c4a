use super::{PhonePair, TranscriptionError};

/// Unit-cost edit distance, keeping one DP row over the shorter sequence.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, x) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + usize::from(x != y));
            diag = above;
        }
    }
    row[short.len()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevenshteinStats {
    /// Mean distance per utterance.
    pub mean: f64,
    /// Mean of distance / canonical length (utterances with an empty
    /// canonical sequence are left out).
    pub normalized_mean: Option<f64>,
    pub utterances: usize,
}

pub fn accent_levenshtein(pairs: &[PhonePair]) -> Result<LevenshteinStats, TranscriptionError> {
    if pairs.is_empty() {
        return Err(TranscriptionError::EmptyGroup);
    }
    let mut total = 0.0;
    let mut norm_total = 0.0;
    let mut norm_n = 0usize;
    for p in pairs {
        let d = levenshtein(&p.canonical, &p.perceived) as f64;
        total += d;
        if !p.canonical.is_empty() {
            norm_total += d / p.canonical.len() as f64;
            norm_n += 1;
        }
    }
    Ok(LevenshteinStats {
        mean: total / pairs.len() as f64,
        normalized_mean: (norm_n > 0).then(|| norm_total / norm_n as f64),
        utterances: pairs.len(),
    })
}
