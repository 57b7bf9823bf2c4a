//! Coordination analysis of acoustic and articulatory speech features.
//!
//! The crate turns multichannel feature trajectories (vocal tract variables
//! or MFCCs) into channel-delay correlation matrices, summarises them as
//! eigenspectra, and scores accent strength as the norm of averaged
//! accent-minus-native matrix differences. Pitch statistics and a phonetic
//! edit-distance baseline complete the comparison.
//!
//! Modules, bottom up:
//! - [`audio`]: WAV decoding and resampling to the 16 kHz analysis rate
//! - [`series`]: multichannel trajectories and the TV-CSV format
//! - [`acoustic`]: MFCC and probabilistic-YIN pitch extraction
//! - [`coord`]: correlation matrices and eigenspectra
//! - [`transcription`]: TextGrid parsing and Levenshtein distances
//! - [`strength`]: accent-strength scores and rankings
//! - [`synth`]: synthetic signals with known coordination complexity
//! - [`pipeline`]: manifest-driven corpus runs and report files

pub mod acoustic;
pub mod audio;
pub mod coord;
pub mod exec;
pub mod pipeline;
pub mod series;
pub mod strength;
pub mod synth;
pub mod transcription;

pub use exec::Exec;
