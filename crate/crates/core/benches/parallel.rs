use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use accent_coord::coord::{build_stacked_matrix_with, CoordConfig};
use accent_coord::exec::{with_workers, Exec};
use accent_coord::pipeline::{run_pipeline, synthetic_group, write_synthetic_corpus, CorpusOptions, Group, RunConfig};
use accent_coord::synth::{gen_coordinated, SynthKind, SynthSpec};

fn matrices(c: &mut Criterion) {
    let cfg = CoordConfig::default();
    let mut group = c.benchmark_group("stacked_matrix");
    for k in [6, 13] {
        let s = gen_coordinated(&SynthSpec::new(SynthKind::Natural, k, 1000, 1)).unwrap();
        for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, k), &s, |b, s| {
                b.iter(|| build_stacked_matrix_with(s, &cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let mut utts = synthetic_group(SynthKind::Simple, Group::Accent, "Korean", 8, 1);
    utts.extend(synthetic_group(SynthKind::Natural, Group::Native, "English", 8, 2));
    let opts = CorpusOptions { frames: 300, audio_seconds: Some(1.0) };
    let manifest = write_synthetic_corpus(dir.path(), &utts, &opts).unwrap();
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get().max(2));

    let mut group = c.benchmark_group("pipeline_16_utterances");
    group.sample_size(10);
    for (name, workers) in [("sequential", 1), ("parallel", threads)] {
        let cfg = RunConfig {
            manifest_path: manifest.clone(),
            output_dir: dir.path().join(name),
            workers,
            cache: false,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| run_pipeline(&cfg).unwrap()));
    }
    group.finish();

    // the pool wrapper itself, for scale against the numbers above
    c.bench_function("with_workers_overhead", |b| b.iter(|| with_workers(threads, |e| e == Exec::Parallel)));
}

criterion_group!(benches, matrices, pipeline);
criterion_main!(benches);
