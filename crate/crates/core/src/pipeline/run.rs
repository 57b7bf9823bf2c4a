use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::cache::{write_features, FeatureCache};
use super::config::{NativeReference, RunConfig, Stages};
use super::manifest::{load_manifest, Gender, Group, Manifest, UtteranceRecord};
use super::report::{emit_reports, PitchRow};
use super::{slug, write_atomic, PipelineError};
use crate::acoustic::{mfcc, pyin_pitch, PitchTrack, VoicedStats};
use crate::audio::{decode_wav, resample, ANALYSIS_RATE};
use crate::coord::{
    build_stacked_matrix_with, eigenspectrum, matrix_to_csv, spectrum_to_csv, Eigenspectrum,
    StackedCoordMatrix,
};
use crate::exec::{with_workers, Exec};
use crate::series::{load_tv_series, validate_series, ChannelSeries, DEFAULT_DEGENERACY_EPS};
use crate::strength::{
    averaged_difference, matrix_norm, PromptMatrix, StrengthError, StrengthMode, StrengthScore,
};
use crate::transcription::{
    accent_levenshtein, extract_phone_pair, read_textgrid, LevenshteinStats, PhonePair,
};

/// Group label used for the pooled native reference.
pub(crate) const NATIVE_LABEL: &str = "native";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Tv,
    Mfcc,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Tv => "tv",
            Feature::Mfcc => "mfcc",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Processed,
    Skipped,
    Rejected,
}

/// One line of `run_log.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub utterance_id: String,
    pub status: Status,
    /// Products obtained for this utterance, e.g. `tv`, `mfcc`, `pitch`.
    pub outputs: Vec<String>,
    /// Reasons for a skip, or partial failures of a processed utterance.
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    /// Every manifest row, sorted by utterance id.
    pub log: Vec<LogEntry>,
    pub warnings: Vec<String>,
    pub stages: Stages,
    /// Averaged spectra keyed by (group label, feature), with utterance counts.
    pub group_spectra: BTreeMap<(String, Feature), (Eigenspectrum, usize)>,
    /// Accent minus native averaged spectra.
    pub diff_spectra: BTreeMap<(String, Feature), Eigenspectrum>,
    /// One row per accent, sorted by accent label.
    pub strength: Vec<StrengthScore>,
    pub levenshtein: BTreeMap<String, LevenshteinStats>,
    pub pitch: Vec<PitchRow>,
    /// Files written by the run, sorted.
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    fn count(&self, status: Status) -> usize {
        self.log.iter().filter(|e| e.status == status).count()
    }

    pub fn processed(&self) -> usize {
        self.count(Status::Processed)
    }

    pub fn skipped(&self) -> usize {
        self.count(Status::Skipped)
    }

    pub fn rejected(&self) -> usize {
        self.count(Status::Rejected)
    }

    /// 0 for a clean run, 2 when anything was skipped, rejected or only
    /// partly analysed.
    pub fn exit_code(&self) -> i32 {
        if self.log.iter().any(|e| e.status != Status::Processed || !e.issues.is_empty()) {
            2
        } else {
            0
        }
    }
}

struct Analysis {
    matrix: StackedCoordMatrix,
    spectrum: Eigenspectrum,
}

struct Outcome {
    entry: LogEntry,
    tv: Option<Analysis>,
    mfcc: Option<Analysis>,
    pitch: Option<VoicedStats>,
    phones: Option<PhonePair>,
}

struct Context<'a> {
    cfg: &'a RunConfig,
    cache: Option<FeatureCache>,
    tv_channels: Vec<&'a str>,
    inner: Exec,
}

fn acoustic_features(
    ctx: &Context<'_>,
    path: &Path,
) -> Result<(ChannelSeries, PitchTrack), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("wav {}: {e}", path.display()))?;
    let key = ctx.cache.as_ref().map(|c| c.key(&bytes));
    if let (Some(cache), Some(key)) = (&ctx.cache, &key) {
        if let Some(hit) = cache.load(key) {
            return Ok(hit);
        }
    }
    let buf = decode_wav(&bytes).map_err(|e| format!("wav {}: {e}", path.display()))?;
    let buf = resample(&buf, ANALYSIS_RATE).map_err(|e| format!("resample: {e}"))?;
    let m = mfcc(&buf, &ctx.cfg.mfcc).map_err(|e| format!("mfcc: {e}"))?;
    let p = pyin_pitch(&buf, &ctx.cfg.pitch).map_err(|e| format!("pitch: {e}"))?;
    if let (Some(cache), Some(key)) = (&ctx.cache, &key) {
        cache.store(key, &m, &p);
    }
    Ok((m, p))
}

fn analyse(ctx: &Context<'_>, series: &ChannelSeries) -> Result<Analysis, String> {
    let matrix = build_stacked_matrix_with(series, &ctx.cfg.coord, ctx.inner).map_err(|e| e.to_string())?;
    let spectrum = eigenspectrum(&matrix, ctx.cfg.eigen_ordering).map_err(|e| e.to_string())?;
    Ok(Analysis { matrix, spectrum })
}

fn export_analysis(ctx: &Context<'_>, stem: &str, feature: Feature, a: &Analysis) -> Result<(), PipelineError> {
    let out = &ctx.cfg.output_dir;
    write_atomic(&out.join("matrices").join(format!("{stem}_{feature}.csv")), matrix_to_csv(&a.matrix).as_bytes())?;
    write_atomic(&out.join("spectra").join(format!("{stem}_{feature}.csv")), spectrum_to_csv(&a.spectrum).as_bytes())
}

fn process(ctx: &Context<'_>, rec: &UtteranceRecord) -> Outcome {
    let stages = ctx.cfg.stages;
    let stem = slug(&rec.utterance_id);
    let mut issues = Vec::new();
    let mut outputs = Vec::new();
    let mut out = Outcome {
        entry: LogEntry { utterance_id: rec.utterance_id.clone(), status: Status::Skipped, outputs: vec![], issues: vec![] },
        tv: None,
        mfcc: None,
        pitch: None,
        phones: None,
    };

    if stages.needs_acoustic() {
        if let Some(path) = &rec.wav_path {
            match acoustic_features(ctx, path) {
                Ok((m, p)) => {
                    if stages.features {
                        match write_features(&ctx.cfg.output_dir.join("features"), &stem, &m, &p) {
                            Ok(()) => outputs.push("features".to_string()),
                            Err(e) => issues.push(e.to_string()),
                        }
                    }
                    if stages.pitch {
                        let stats = VoicedStats::of(&p);
                        if stats.frames == 0 {
                            issues.push("pitch: no voiced frames".into());
                        }
                        out.pitch = Some(stats);
                        outputs.push("pitch".into());
                    }
                    if stages.needs_matrices() {
                        match analyse(ctx, &m) {
                            Ok(a) => {
                                out.mfcc = Some(a);
                                outputs.push("mfcc".into());
                            }
                            Err(e) => issues.push(format!("mfcc coordination: {e}")),
                        }
                    }
                }
                Err(e) => issues.push(e),
            }
        }
    }

    if stages.needs_matrices() {
        if let Some(path) = &rec.tv_path {
            match load_tv_series(path, &ctx.tv_channels, ctx.cfg.tv_frame_rate) {
                Ok(series) => {
                    let report = validate_series(&series, DEFAULT_DEGENERACY_EPS);
                    if !report.degenerate_channels.is_empty() {
                        let names: Vec<_> = report.degenerate_channels.iter().map(|(n, _)| n.as_str()).collect();
                        issues.push(format!("tv: degenerate channels {}", names.join(",")));
                    } else if report.nan_count > 0 {
                        issues.push(format!("tv: {} non-finite values", report.nan_count));
                    } else {
                        match analyse(ctx, &series) {
                            Ok(a) => {
                                out.tv = Some(a);
                                outputs.push("tv".into());
                            }
                            Err(e) => issues.push(format!("tv coordination: {e}")),
                        }
                    }
                }
                Err(e) => issues.push(format!("tv {}: {e}", path.display())),
            }
        }
    }

    if stages.utterance_coord {
        for (feature, a) in [(Feature::Tv, &out.tv), (Feature::Mfcc, &out.mfcc)] {
            if let Some(a) = a {
                if let Err(e) = export_analysis(ctx, &stem, feature, a) {
                    issues.push(e.to_string());
                }
            }
        }
    }

    if stages.strength && rec.group == Group::Accent {
        if let Some(path) = &rec.textgrid_path {
            match read_textgrid(path)
                .map_err(|e| e.to_string())
                .and_then(|g| extract_phone_pair(&g, &ctx.cfg.tier).map_err(|e| e.to_string()))
            {
                Ok(pair) => {
                    out.phones = Some(pair);
                    outputs.push("phones".into());
                }
                Err(e) => issues.push(format!("textgrid {}: {e}", path.display())),
            }
        }
    }

    if outputs.is_empty() && issues.is_empty() {
        let need = if stages.needs_matrices() { "wav_path or tv_path" } else { "wav_path" };
        issues.push(format!("no {need} usable for the requested stages"));
    }
    out.entry.status = if outputs.is_empty() { Status::Skipped } else { Status::Processed };
    out.entry.outputs = outputs;
    out.entry.issues = issues;
    out
}

/// Running sum of matrices with a count.
struct MatrixSum {
    sum: StackedCoordMatrix,
    n: usize,
}

impl MatrixSum {
    fn new() -> Option<Self> {
        None
    }

    fn add(acc: &mut Option<Self>, m: &StackedCoordMatrix) -> Result<(), String> {
        match acc {
            None => *acc = Some(MatrixSum { sum: m.clone(), n: 1 }),
            Some(a) => {
                if !a.sum.same_shape(m) {
                    return Err("matrix shape differs from the rest of its group".into());
                }
                for (x, y) in a.sum.per_scale.iter_mut().zip(&m.per_scale) {
                    *x += y;
                }
                a.n += 1;
            }
        }
        Ok(())
    }

    fn merge(acc: &mut Option<Self>, other: &MatrixSum) -> Result<(), String> {
        match acc {
            None => *acc = Some(MatrixSum { sum: other.sum.clone(), n: other.n }),
            Some(a) => {
                if !a.sum.same_shape(&other.sum) {
                    return Err("matrix shape differs from the rest of its group".into());
                }
                for (x, y) in a.sum.per_scale.iter_mut().zip(&other.sum.per_scale) {
                    *x += y;
                }
                a.n += other.n;
            }
        }
        Ok(())
    }

    fn mean(&self) -> StackedCoordMatrix {
        let mut m = self.sum.clone();
        let n = self.n as f64;
        m.per_scale.iter_mut().for_each(|x| *x /= n);
        m
    }
}

/// (feature, group label, gender, prompt)
type MatrixKey = (Feature, String, Gender, Option<String>);

/// Per-prompt mean matrices and the overall mean for one group.
type GroupMeans = (Vec<(Option<String>, StackedCoordMatrix)>, StackedCoordMatrix);

#[derive(Default)]
struct Aggregates {
    spectra: BTreeMap<(String, Feature), (Eigenspectrum, usize)>,
    matrices: BTreeMap<MatrixKey, MatrixSum>,
    pitch: BTreeMap<(String, Gender), BTreeMap<String, VoicedStats>>,
    phones: BTreeMap<String, Vec<PhonePair>>,
    accent_utterances: BTreeMap<String, usize>,
}

impl Aggregates {
    fn fold(&mut self, rec: &UtteranceRecord, out: Outcome, entry: &mut LogEntry) {
        let label = match rec.group {
            Group::Native => NATIVE_LABEL.to_string(),
            Group::Accent => rec.l1.clone(),
        };
        if rec.group == Group::Accent && entry.status == Status::Processed {
            *self.accent_utterances.entry(label.clone()).or_default() += 1;
        }
        for (feature, a) in [(Feature::Tv, out.tv), (Feature::Mfcc, out.mfcc)] {
            let Some(a) = a else { continue };
            let key = (label.clone(), feature);
            let res = match self.spectra.get_mut(&key) {
                None => {
                    self.spectra.insert(key, (a.spectrum, 1));
                    Ok(())
                }
                Some((sum, n)) => match sum.check_shape(&a.spectrum) {
                    Ok(()) => {
                        *sum = sum.zip_with(&a.spectrum, |x, y| x + y);
                        *n += 1;
                        Ok(())
                    }
                    Err(e) => Err(e.to_string()),
                },
            };
            let mkey = (feature, label.clone(), rec.gender, rec.prompt_id.clone());
            let mut slot = self.matrices.remove(&mkey);
            let res = res.and_then(|_| MatrixSum::add(&mut slot, &a.matrix));
            if let Some(s) = slot {
                self.matrices.insert(mkey, s);
            }
            if let Err(e) = res {
                entry.issues.push(format!("{feature}: {e}; excluded from group"));
            }
        }
        if let Some(stats) = out.pitch {
            let speakers = self.pitch.entry((rec.l1.clone(), rec.gender)).or_default();
            let s = speakers.entry(rec.speaker_id.clone()).or_default();
            *s = s.merge(stats);
        }
        if let Some(pair) = out.phones {
            self.phones.entry(rec.l1.clone()).or_default().push(pair);
        }
    }

    /// Per-prompt mean matrices for one group, optionally restricted to a
    /// gender, plus the overall utterance-weighted mean.
    fn group_means(
        &self,
        feature: Feature,
        label: &str,
        gender: Option<Gender>,
    ) -> Result<Option<GroupMeans>, String> {
        let mut per_prompt: BTreeMap<Option<String>, Option<MatrixSum>> = BTreeMap::new();
        let mut total = MatrixSum::new();
        for ((f, l, g, prompt), sum) in &self.matrices {
            if *f != feature || l != label || gender.is_some_and(|x| x != *g) {
                continue;
            }
            MatrixSum::merge(per_prompt.entry(prompt.clone()).or_default(), sum)?;
            MatrixSum::merge(&mut total, sum)?;
        }
        let Some(total) = total else { return Ok(None) };
        let prompts = per_prompt.into_iter().filter_map(|(p, s)| s.map(|s| (p, s.mean()))).collect();
        Ok(Some((prompts, total.mean())))
    }

    fn difference(
        &self,
        feature: Feature,
        accent: &str,
        gender: Option<Gender>,
        mode: StrengthMode,
        warnings: &mut Vec<String>,
    ) -> Result<Option<StackedCoordMatrix>, String> {
        let (Some(acc), Some(nat)) = (
            self.group_means(feature, accent, gender)?,
            self.group_means(feature, NATIVE_LABEL, gender)?,
        ) else {
            return Ok(None);
        };
        let whole = |(_, m): &(Vec<_>, StackedCoordMatrix)| m.clone();
        let group_mean = |a: &StackedCoordMatrix, n: &StackedCoordMatrix| {
            averaged_difference(
                &[PromptMatrix { prompt: None, matrix: a }],
                &[PromptMatrix { prompt: None, matrix: n }],
                StrengthMode::GroupMean,
            )
        };
        let result = match mode {
            StrengthMode::GroupMean => group_mean(&whole(&acc), &whole(&nat)),
            StrengthMode::Paired => {
                let a: Vec<_> = acc.0.iter().map(|(p, m)| PromptMatrix { prompt: p.as_deref(), matrix: m }).collect();
                let n: Vec<_> = nat.0.iter().map(|(p, m)| PromptMatrix { prompt: p.as_deref(), matrix: m }).collect();
                match averaged_difference(&a, &n, StrengthMode::Paired) {
                    Err(StrengthError::PairingIncomplete(missing)) => {
                        warnings.push(format!(
                            "{accent} {feature}: no native match for prompts {}; using group means",
                            missing.join(",")
                        ));
                        group_mean(&acc.1, &nat.1)
                    }
                    other => other,
                }
            }
        };
        result.map(Some).map_err(|e| e.to_string())
    }
}

/// Mean of per-gender difference matrices, for the accent genders that have
/// a same-gender native reference.
fn per_gender_difference(
    agg: &Aggregates,
    feature: Feature,
    accent: &str,
    mode: StrengthMode,
    warnings: &mut Vec<String>,
) -> Result<Option<StackedCoordMatrix>, String> {
    let mut acc = MatrixSum::new();
    for g in [Gender::M, Gender::F] {
        let has_accent = agg.group_means(feature, accent, Some(g))?.is_some();
        if !has_accent {
            continue;
        }
        match agg.difference(feature, accent, Some(g), mode, warnings)? {
            Some(d) => MatrixSum::add(&mut acc, &d)?,
            None => warnings.push(format!("{accent} {feature}: no {g} native reference")),
        }
    }
    Ok(acc.map(|a| a.mean()))
}

fn pitch_rows(agg: &Aggregates) -> Vec<PitchRow> {
    agg.pitch
        .iter()
        .map(|((l1, gender), speakers)| {
            let means: Vec<f64> = speakers.values().filter_map(VoicedStats::mean).collect();
            PitchRow {
                l1: l1.clone(),
                gender: *gender,
                n_speakers: means.len(),
                mean_pitch_hz: (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64),
            }
        })
        .collect()
}

fn validate(cfg: &RunConfig) -> Result<(), PipelineError> {
    let bad = |e: &dyn fmt::Display| PipelineError::InvalidConfig(e.to_string());
    cfg.coord.validate().map_err(|e| bad(&e))?;
    cfg.mfcc.validate().map_err(|e| bad(&e))?;
    cfg.pitch.validate(ANALYSIS_RATE).map_err(|e| bad(&e))?;
    if cfg.workers == 0 {
        return Err(PipelineError::InvalidConfig("workers must be at least 1".into()));
    }
    if !(cfg.tv_frame_rate.is_finite() && cfg.tv_frame_rate > 0.0) {
        return Err(PipelineError::InvalidConfig("tv_frame_rate must be positive".into()));
    }
    if cfg.tv_channels.is_empty() {
        return Err(PipelineError::InvalidConfig("tv_channels is empty".into()));
    }
    Ok(())
}

/// Loads the manifest named in `cfg`, analyses every record and writes the
/// requested reports under `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    validate(cfg)?;
    let manifest = load_manifest(&cfg.manifest_path)?;
    let mut summary = run_manifest(cfg, &manifest)?;
    summary.files = emit_reports(&summary, &cfg.output_dir)?;
    Ok(summary)
}

pub(crate) fn run_manifest(cfg: &RunConfig, manifest: &Manifest) -> Result<RunSummary, PipelineError> {
    if manifest.records.is_empty() {
        return Err(PipelineError::EmptyManifest);
    }
    let has_accent = manifest.records.iter().any(|r| r.group == Group::Accent);
    let has_native = manifest.records.iter().any(|r| r.group == Group::Native);
    if cfg.stages.strength && has_accent && !has_native {
        return Err(PipelineError::NoNativeReference);
    }

    let mut warnings: Vec<String> = manifest
        .dangling
        .iter()
        .map(|(id, p)| format!("{id}: missing file {}", p.display()))
        .collect();

    let chunk = 32 * cfg.workers;
    let mut agg = Aggregates::default();
    let mut log = Vec::with_capacity(manifest.records.len() + manifest.rejected.len());
    with_workers(cfg.workers, |exec| {
        let ctx = Context {
            cfg,
            cache: cfg.cache.then(|| FeatureCache::new(cfg.cache_dir(), &cfg.mfcc, &cfg.pitch)),
            tv_channels: cfg.tv_channels.iter().map(String::as_str).collect(),
            inner: exec,
        };
        for batch in manifest.records.chunks(chunk) {
            let outcomes = exec.map(batch, |rec| process(&ctx, rec));
            for (rec, mut out) in batch.iter().zip(outcomes) {
                let mut entry = std::mem::replace(&mut out.entry, LogEntry {
                    utterance_id: String::new(),
                    status: Status::Skipped,
                    outputs: vec![],
                    issues: vec![],
                });
                if entry.status == Status::Skipped {
                    log::warn!("{}: skipped ({})", entry.utterance_id, entry.issues.join("; "));
                }
                agg.fold(rec, out, &mut entry);
                log.push(entry);
            }
        }
    });
    for r in &manifest.rejected {
        log.push(LogEntry {
            utterance_id: r.label(),
            status: Status::Rejected,
            outputs: vec![],
            issues: vec![r.reason.clone()],
        });
    }
    log.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));

    let mut summary = RunSummary { stages: cfg.stages, ..Default::default() };

    if cfg.stages.group_spectra {
        for ((label, feature), (sum, n)) in &agg.spectra {
            let inv = 1.0 / *n as f64;
            let mean = sum.zip_with(sum, |x, _| x * inv);
            summary.group_spectra.insert((label.clone(), *feature), (mean, *n));
        }
        for ((label, feature), (spec, _)) in &summary.group_spectra {
            if label == NATIVE_LABEL {
                continue;
            }
            match summary.group_spectra.get(&(NATIVE_LABEL.to_string(), *feature)) {
                Some((native, _)) => match crate::coord::difference_spectrum(spec, native) {
                    Ok(d) => {
                        summary.diff_spectra.insert((label.clone(), *feature), d);
                    }
                    Err(e) => warnings.push(format!("{label} {feature} difference spectrum: {e}")),
                },
                None => warnings.push(format!("{label} {feature}: no native spectra to compare against")),
            }
        }
    }

    if cfg.stages.strength {
        let accents: BTreeSet<String> = agg
            .accent_utterances
            .keys()
            .chain(agg.phones.keys())
            .cloned()
            .collect();
        if accents.is_empty() {
            warnings.push("no accent utterances; accent strength table is empty".into());
        }
        for accent in &accents {
            let mut score = |feature: Feature| -> Option<f64> {
                let diff = match cfg.native_reference {
                    NativeReference::Pooled => agg.difference(feature, accent, None, cfg.strength_mode, &mut warnings),
                    NativeReference::PerGender => {
                        per_gender_difference(&agg, feature, accent, cfg.strength_mode, &mut warnings)
                    }
                };
                match diff {
                    Ok(d) => d.map(|d| matrix_norm(&d, cfg.norm)),
                    Err(e) => {
                        warnings.push(format!("{accent} {feature} strength: {e}"));
                        None
                    }
                }
            };
            let articulatory = score(Feature::Tv);
            let acoustic = score(Feature::Mfcc);
            let lev = agg.phones.get(accent).and_then(|pairs| accent_levenshtein(pairs).ok());
            if let Some(l) = &lev {
                summary.levenshtein.insert(accent.clone(), *l);
            }
            summary.strength.push(StrengthScore {
                accent: accent.clone(),
                articulatory,
                acoustic,
                levenshtein_mean: lev.map(|l| l.mean),
                n_utterances: agg.accent_utterances.get(accent).copied().unwrap_or(0),
            });
        }
    }

    if cfg.stages.pitch {
        summary.pitch = pitch_rows(&agg);
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    summary.log = log;
    summary.warnings = warnings;
    Ok(summary)
}
