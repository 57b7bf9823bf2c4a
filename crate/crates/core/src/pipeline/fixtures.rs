//! Synthetic corpora on disk, for tests, benches and the `synth` command.

use std::path::{Path, PathBuf};

use super::manifest::{manifest_to_csv, Gender, Group, UtteranceRecord};
use super::{write_atomic, PipelineError};
use crate::audio::{encode_wav, WavEncoding, ANALYSIS_RATE};
use crate::series::to_tv_csv;
use crate::synth::{gen_coordinated, gen_voice, SynthKind, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub utterance_id: String,
    pub kind: SynthKind,
    pub group: Group,
    pub l1: String,
    pub gender: Gender,
    pub speaker_id: String,
    pub prompt_id: Option<String>,
    pub seed: u64,
}

/// Layout of a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOptions {
    /// TV frames per utterance (at 100 Hz).
    pub frames: usize,
    /// Also write a WAV file of this many seconds per utterance.
    pub audio_seconds: Option<f64>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self { frames: 300, audio_seconds: None }
    }
}

/// `count` utterances of one kind spread over two speakers of each gender,
/// with prompts `p000`, `p001`, ... so that groups built with the same
/// count pair up completely.
pub fn synthetic_group(
    kind: SynthKind,
    group: Group,
    l1: &str,
    count: usize,
    seed: u64,
) -> Vec<SyntheticUtterance> {
    let tag = l1.to_ascii_lowercase();
    (0..count)
        .map(|i| {
            let gender = if i % 2 == 0 { Gender::M } else { Gender::F };
            SyntheticUtterance {
                utterance_id: format!("{tag}_{i:03}"),
                kind,
                group,
                l1: l1.to_string(),
                gender,
                speaker_id: format!("{tag}_{gender}{}", (i / 2) % 2),
                prompt_id: Some(format!("p{i:03}")),
                seed: seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
            }
        })
        .collect()
}

fn base_pitch(u: &SyntheticUtterance) -> f64 {
    let base = match u.gender {
        Gender::M => 110.0,
        Gender::F => 190.0,
    };
    base + (u.seed % 7) as f64 * 2.0
}

/// Writes TV-CSV (and optionally WAV) files plus `manifest.csv` into `dir`
/// and returns the manifest path.
pub fn write_synthetic_corpus(
    dir: &Path,
    utterances: &[SyntheticUtterance],
    opts: &CorpusOptions,
) -> Result<PathBuf, PipelineError> {
    let mut records = Vec::with_capacity(utterances.len());
    for u in utterances {
        let spec = SynthSpec::new(u.kind, 6, opts.frames, u.seed);
        let series = gen_coordinated(&spec).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        let tv_name = format!("{}.tv.csv", u.utterance_id);
        write_atomic(&dir.join(&tv_name), to_tv_csv(&series).as_bytes())?;
        let wav_path = match opts.audio_seconds {
            Some(secs) => {
                let voice = gen_voice(base_pitch(u), secs, ANALYSIS_RATE, u.seed)
                    .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
                let name = format!("{}.wav", u.utterance_id);
                let bytes = encode_wav(&[voice.samples], ANALYSIS_RATE, WavEncoding::Pcm16);
                write_atomic(&dir.join(&name), &bytes)?;
                Some(PathBuf::from(name))
            }
            None => None,
        };
        records.push(UtteranceRecord {
            utterance_id: u.utterance_id.clone(),
            wav_path,
            tv_path: Some(PathBuf::from(tv_name)),
            textgrid_path: None,
            speaker_id: u.speaker_id.clone(),
            l1: u.l1.clone(),
            gender: u.gender,
            group: u.group,
            prompt_id: u.prompt_id.clone(),
        });
    }
    let manifest = dir.join("manifest.csv");
    write_atomic(&manifest, manifest_to_csv(&records).as_bytes())?;
    Ok(manifest)
}
