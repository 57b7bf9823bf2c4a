//! Accent strength as the norm of averaged accent-minus-native coordination
//! matrices, plus ranking helpers for comparing against the edit-distance
//! baseline.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coord::{CoordError, StackedCoordMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum StrengthError {
    #[error("no native utterances for prompts: {}", .0.join(", "))]
    PairingIncomplete(Vec<String>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty group")]
    EmptyGroup,
    #[error("accent {0} has no value for the ranking key")]
    MissingKey(String),
}

impl From<CoordError> for StrengthError {
    fn from(e: CoordError) -> Self {
        match e {
            CoordError::EmptyGroup => StrengthError::EmptyGroup,
            other => StrengthError::ShapeMismatch(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthMode {
    /// Differences per shared prompt, then averaged over prompts.
    #[default]
    Paired,
    /// Mean accent matrix minus mean native matrix.
    GroupMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    #[default]
    Frobenius,
    /// Largest singular value of the stacked matrix.
    Spectral,
    EntrywiseL1,
}

/// A coordination matrix tagged with the prompt that was read.
#[derive(Debug, Clone, Copy)]
pub struct PromptMatrix<'a> {
    pub prompt: Option<&'a str>,
    pub matrix: &'a StackedCoordMatrix,
}

/// Entry-wise mean of the matrices, accumulated in input order.
pub fn group_mean_matrix(mats: &[&StackedCoordMatrix]) -> Result<StackedCoordMatrix, StrengthError> {
    let first = *mats.first().ok_or(StrengthError::EmptyGroup)?;
    let mut acc = first.clone();
    for m in &mats[1..] {
        first.check_shape(m)?;
        for (a, b) in acc.per_scale.iter_mut().zip(&m.per_scale) {
            *a += b;
        }
    }
    let n = mats.len() as f64;
    for a in &mut acc.per_scale {
        *a /= n;
    }
    Ok(acc)
}

fn subtract(a: &StackedCoordMatrix, b: &StackedCoordMatrix) -> Result<StackedCoordMatrix, StrengthError> {
    a.check_shape(b)?;
    let per_scale = a.per_scale.iter().zip(&b.per_scale).map(|(x, y)| x - y).collect();
    Ok(StackedCoordMatrix { per_scale, ..a.clone() })
}

type PromptGroups<'a> = (BTreeMap<&'a str, Vec<&'a StackedCoordMatrix>>, usize);

fn by_prompt<'a>(items: &[PromptMatrix<'a>]) -> PromptGroups<'a> {
    let mut map: BTreeMap<&str, Vec<&StackedCoordMatrix>> = BTreeMap::new();
    let mut untagged = 0;
    for u in items {
        match u.prompt {
            Some(p) => map.entry(p).or_default().push(u.matrix),
            None => untagged += 1,
        }
    }
    (map, untagged)
}

/// The averaged difference matrix that [`strength_score`] takes the norm of.
pub fn averaged_difference(
    accent: &[PromptMatrix<'_>],
    native: &[PromptMatrix<'_>],
    mode: StrengthMode,
) -> Result<StackedCoordMatrix, StrengthError> {
    if accent.is_empty() || native.is_empty() {
        return Err(StrengthError::EmptyGroup);
    }
    match mode {
        StrengthMode::GroupMean => {
            let a: Vec<_> = accent.iter().map(|u| u.matrix).collect();
            let n: Vec<_> = native.iter().map(|u| u.matrix).collect();
            subtract(&group_mean_matrix(&a)?, &group_mean_matrix(&n)?)
        }
        StrengthMode::Paired => {
            let (acc_map, acc_untagged) = by_prompt(accent);
            let (nat_map, _) = by_prompt(native);

            let mut unmatched: Vec<String> = acc_map
                .keys()
                .filter(|p| !nat_map.contains_key(*p))
                .map(|p| p.to_string())
                .collect();
            if acc_untagged > 0 {
                unmatched.push(format!("<{acc_untagged} without prompt id>"));
            }
            if !unmatched.is_empty() {
                return Err(StrengthError::PairingIncomplete(unmatched));
            }

            let diffs = acc_map
                .iter()
                .map(|(p, mats)| subtract(&group_mean_matrix(mats)?, &group_mean_matrix(&nat_map[p])?))
                .collect::<Result<Vec<_>, _>>()?;
            group_mean_matrix(&diffs.iter().collect::<Vec<_>>())
        }
    }
}

pub fn matrix_norm(m: &StackedCoordMatrix, norm: MatrixNorm) -> f64 {
    match norm {
        MatrixNorm::Frobenius => m
            .per_scale
            .iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt(),
        MatrixNorm::EntrywiseL1 => m.per_scale.iter().flat_map(|x| x.iter()).map(|v| v.abs()).sum(),
        MatrixNorm::Spectral => {
            let st: DMatrix<f64> = m.stacked();
            st.singular_values().max()
        }
    }
}

/// Accent strength: norm of the averaged accent-minus-native difference.
pub fn strength_score(
    accent: &[PromptMatrix<'_>],
    native: &[PromptMatrix<'_>],
    mode: StrengthMode,
    norm: MatrixNorm,
) -> Result<f64, StrengthError> {
    Ok(matrix_norm(&averaged_difference(accent, native, mode)?, norm))
}

/// One row of the accent-strength table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrengthScore {
    pub accent: String,
    pub articulatory: Option<f64>,
    pub acoustic: Option<f64>,
    pub levenshtein_mean: Option<f64>,
    pub n_utterances: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    Articulatory,
    Acoustic,
    Levenshtein,
}

impl StrengthScore {
    pub fn get(&self, key: RankKey) -> Option<f64> {
        match key {
            RankKey::Articulatory => self.articulatory,
            RankKey::Acoustic => self.acoustic,
            RankKey::Levenshtein => self.levenshtein_mean,
        }
    }
}

/// Accent labels in ascending order of `key`; ties break on the label.
pub fn rank_accents(scores: &[StrengthScore], key: RankKey) -> Result<Vec<String>, StrengthError> {
    let mut keyed = scores
        .iter()
        .map(|s| s.get(key).map(|v| (v, &s.accent)).ok_or_else(|| StrengthError::MissingKey(s.accent.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    Ok(keyed.into_iter().map(|(_, a)| a.clone()).collect())
}

/// Average ranks (1-based), with ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` for fewer than two points or a
/// constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut va, mut vb) = (0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}
