use std::path::{Path, PathBuf};
use std::process::ExitCode;

use accent_coord::coord::RankOrder;
use accent_coord::pipeline::{
    run_pipeline, synthetic_group, write_synthetic_corpus, CorpusOptions, Group, NativeReference,
    RunConfig, Stages,
};
use accent_coord::strength::{MatrixNorm, StrengthMode};
use accent_coord::synth::SynthKind;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "accent-coord", version, about = "Articulatory and acoustic coordination analysis of accented speech")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract MFCC and pitch tracks into features/.
    Extract(RunArgs),
    /// Per-utterance matrices and spectra plus group and difference spectra.
    Coord(RunArgs),
    /// Accent strength table.
    Strength(RunArgs),
    /// Mean pitch per L1 and gender.
    Pitch(RunArgs),
    /// Full pipeline.
    Run(RunArgs),
    /// Write a synthetic corpus with a manifest.
    Synth(SynthArgs),
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    toml::Value::String(s.replace('-', "_"))
        .try_into()
        .map_err(|_| format!("unrecognised value {s:?}"))
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML file with RunConfig keys; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    manifest: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(short, long)]
    workers: Option<usize>,
    /// Delay scales in frames, comma separated.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<usize>>,
    #[arg(long)]
    delays_per_scale: Option<usize>,
    /// Use raw rather than z-scored channels.
    #[arg(long)]
    no_zscore: bool,
    /// paired | group_mean
    #[arg(long, value_parser = parse_enum::<StrengthMode>)]
    strength_mode: Option<StrengthMode>,
    /// frobenius | spectral | entrywise_l1
    #[arg(long, value_parser = parse_enum::<MatrixNorm>)]
    norm: Option<MatrixNorm>,
    /// pooled | per_gender
    #[arg(long, value_parser = parse_enum::<NativeReference>)]
    native_reference: Option<NativeReference>,
    /// signed | magnitude
    #[arg(long, value_parser = parse_enum::<RankOrder>)]
    eigen_ordering: Option<RankOrder>,
    #[arg(long, value_delimiter = ',')]
    tv_channels: Option<Vec<String>>,
    #[arg(long)]
    tv_frame_rate: Option<f64>,
    /// TextGrid tier holding the phone annotations.
    #[arg(long)]
    tier: Option<String>,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self, stages: Stages) -> Result<RunConfig> {
        let (mut cfg, file_sets_stages) = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
                let has_stages = table.contains_key("stages");
                let mut cfg: RunConfig = toml::Value::Table(table)
                    .try_into()
                    .with_context(|| format!("parsing {}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new("."));
                if cfg.manifest_path.is_relative() {
                    cfg.manifest_path = base.join(&cfg.manifest_path);
                }
                (cfg, has_stages)
            }
            None => (RunConfig::default(), false),
        };
        // the subcommand picks the outputs unless the file lists them
        if !file_sets_stages {
            cfg.stages = stages;
        }
        if let Some(v) = self.manifest {
            cfg.manifest_path = v;
        }
        if let Some(v) = self.output {
            cfg.output_dir = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = self.scales {
            cfg.coord.scales = v;
        }
        if let Some(v) = self.delays_per_scale {
            cfg.coord.delays_per_scale = v;
        }
        if self.no_zscore {
            cfg.coord.zscore = false;
        }
        if let Some(v) = self.strength_mode {
            cfg.strength_mode = v;
        }
        if let Some(v) = self.norm {
            cfg.norm = v;
        }
        if let Some(v) = self.native_reference {
            cfg.native_reference = v;
        }
        if let Some(v) = self.eigen_ordering {
            cfg.eigen_ordering = v;
        }
        if let Some(v) = self.tv_channels {
            cfg.tv_channels = v;
        }
        if let Some(v) = self.tv_frame_rate {
            cfg.tv_frame_rate = v;
        }
        if let Some(v) = self.tier {
            cfg.tier = v;
        }
        if self.no_cache {
            cfg.cache = false;
        }
        if let Some(v) = self.cache_dir {
            cfg.cache_dir = Some(v);
        }
        Ok(cfg)
    }
}

/// `KIND:GROUP:L1:COUNT`, e.g. `simple:accent:Korean:6`.
#[derive(Debug, Clone)]
struct GroupSpec {
    kind: SynthKind,
    group: Group,
    l1: String,
    count: usize,
}

fn parse_group_spec(s: &str) -> Result<GroupSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [kind, group, l1, count] = parts[..] else {
        return Err("expected KIND:GROUP:L1:COUNT".into());
    };
    Ok(GroupSpec {
        kind: kind.parse().map_err(|e| format!("{e}"))?,
        group: match group {
            "native" => Group::Native,
            "accent" => Group::Accent,
            _ => return Err(format!("group must be native or accent, got {group:?}")),
        },
        l1: l1.to_string(),
        count: count.parse().map_err(|_| format!("bad count {count:?}"))?,
    })
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Directory to write into.
    #[arg(short, long)]
    out: PathBuf,
    /// Repeatable group spec KIND:GROUP:L1:COUNT.
    #[arg(long = "group", value_parser = parse_group_spec,
          default_values = ["simple:accent:Korean:6", "natural:native:English:6"])]
    groups: Vec<GroupSpec>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TV frames per utterance (100 Hz).
    #[arg(long, default_value_t = 300)]
    frames: usize,
    /// Also write WAV audio of this many seconds.
    #[arg(long)]
    audio_seconds: Option<f64>,
}

fn synth(args: SynthArgs) -> Result<()> {
    if args.groups.is_empty() {
        bail!("no groups given");
    }
    let mut utts = Vec::new();
    for (i, g) in args.groups.iter().enumerate() {
        utts.extend(synthetic_group(g.kind, g.group, &g.l1, g.count, args.seed.wrapping_add(i as u64 * 7919)));
    }
    let mut ids = std::collections::HashSet::new();
    if let Some(u) = utts.iter().find(|u| !ids.insert(u.utterance_id.clone())) {
        bail!("two groups produce utterance id {}; give each group its own L1", u.utterance_id);
    }
    let opts = CorpusOptions { frames: args.frames, audio_seconds: args.audio_seconds };
    let manifest = write_synthetic_corpus(&args.out, &utts, &opts)?;
    println!("{}", manifest.display());
    Ok(())
}

fn run(args: RunArgs, stages: Stages) -> Result<i32> {
    let cfg = args.into_config(stages)?;
    let summary = run_pipeline(&cfg)?;
    eprintln!(
        "processed {} skipped {} rejected {}; {} files in {}",
        summary.processed(),
        summary.skipped(),
        summary.rejected(),
        summary.files.len(),
        cfg.output_dir.display()
    );
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    // usage errors are configuration errors: exit 1, keeping 2 for skips
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Extract(a) => run(a, Stages::EXTRACT),
        Command::Coord(a) => run(a, Stages::COORD),
        Command::Strength(a) => run(a, Stages::STRENGTH),
        Command::Pitch(a) => run(a, Stages::PITCH),
        Command::Run(a) => run(a, Stages::RUN),
        Command::Synth(a) => synth(a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
