use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::acoustic::{MfccConfig, PitchConfig};
use crate::coord::{CoordConfig, RankOrder};
use crate::series::{DEFAULT_FRAME_RATE, TV_CHANNELS};
use crate::strength::{MatrixNorm, StrengthMode};
use crate::transcription::DEFAULT_TIER;

/// Which native utterances an accent group is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NativeReference {
    /// All native speakers, both genders.
    #[default]
    Pooled,
    /// Accent speakers of each gender against natives of the same gender;
    /// the per-gender difference matrices are then averaged.
    PerGender,
}

/// Outputs a run should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stages {
    /// Per-utterance MFCC and pitch files under `features/`.
    pub features: bool,
    /// Per-utterance matrices and spectra under `matrices/` and `spectra/`.
    pub utterance_coord: bool,
    /// Group-averaged and difference spectra.
    pub group_spectra: bool,
    /// `accent_strength.csv` and `levenshtein.csv`.
    pub strength: bool,
    /// `pitch_by_group.csv`.
    pub pitch: bool,
}

impl Stages {
    pub const RUN: Stages =
        Stages { features: false, utterance_coord: false, group_spectra: true, strength: true, pitch: true };
    pub const EXTRACT: Stages =
        Stages { features: true, utterance_coord: false, group_spectra: false, strength: false, pitch: false };
    pub const COORD: Stages =
        Stages { features: false, utterance_coord: true, group_spectra: true, strength: false, pitch: false };
    pub const STRENGTH: Stages =
        Stages { features: false, utterance_coord: false, group_spectra: false, strength: true, pitch: false };
    pub const PITCH: Stages =
        Stages { features: false, utterance_coord: false, group_spectra: false, strength: false, pitch: true };

    pub(crate) fn needs_matrices(&self) -> bool {
        self.utterance_coord || self.group_spectra || self.strength
    }

    pub(crate) fn needs_acoustic(&self) -> bool {
        self.features || self.pitch || self.needs_matrices()
    }
}

impl Default for Stages {
    fn default() -> Self {
        Stages::RUN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub output_dir: PathBuf,
    pub coord: CoordConfig,
    pub mfcc: MfccConfig,
    pub pitch: PitchConfig,
    pub strength_mode: StrengthMode,
    pub norm: MatrixNorm,
    pub native_reference: NativeReference,
    pub workers: usize,
    pub eigen_ordering: RankOrder,
    pub tv_channels: Vec<String>,
    pub tv_frame_rate: f64,
    pub tier: String,
    /// Reuse extracted MFCC/pitch keyed by audio content and config.
    pub cache: bool,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub stages: Stages,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest_path: PathBuf::from("manifest.csv"),
            output_dir: PathBuf::from("out"),
            coord: CoordConfig::default(),
            mfcc: MfccConfig::default(),
            pitch: PitchConfig::default(),
            strength_mode: StrengthMode::default(),
            norm: MatrixNorm::default(),
            native_reference: NativeReference::default(),
            workers: 1,
            eigen_ordering: RankOrder::default(),
            tv_channels: TV_CHANNELS.iter().map(|s| s.to_string()).collect(),
            tv_frame_rate: DEFAULT_FRAME_RATE,
            tier: DEFAULT_TIER.to_string(),
            cache: true,
            cache_dir: None,
            stages: Stages::default(),
        }
    }
}

impl RunConfig {
    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }
}
