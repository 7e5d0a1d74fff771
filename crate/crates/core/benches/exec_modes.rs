use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pgo_core::adaptive::{run_rows, AdaptiveConfig, TraceRow};
use pgo_core::cct::{Cct, PathMapping};
use pgo_core::profile::{parse_batch, write_batch, CallFrame, ProfileRecord, StackSample};
use pgo_core::rewrite::{rewrite_sources, PlanOptions, SourceFile};
use pgo_core::simulate::{simulate, SimSpec};
use pgo_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn samples(n: usize) -> Vec<StackSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..n)
        .map(|i| {
            let mut frames = vec![CallFrame::new("handler", "/var/task/handler.py", 3)];
            for _ in 0..rng.gen_range(1..16) {
                let lib = rng.gen_range(0..24);
                frames.push(CallFrame::new(
                    ["run", "load", "step"][rng.gen_range(0..3)],
                    format!("/env/site-packages/lib{lib}/core.py"),
                    rng.gen_range(1..400),
                ));
            }
            StackSample {
                timestamp_ms: i as i64,
                invocation_id: format!("inv{}", i % 50),
                entry_point: "handler.handler".into(),
                frames,
            }
        })
        .collect()
}

fn bench_parse(c: &mut Criterion) {
    let text = write_batch(
        &samples(20_000)
            .into_iter()
            .map(ProfileRecord::Sample)
            .collect::<Vec<_>>(),
    );
    let mut g = c.benchmark_group("parse_batch");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &text, |b, t| {
            b.iter(|| parse_batch(black_box(t), mode).unwrap())
        });
    }
    g.finish();
}

fn bench_cct(c: &mut Criterion) {
    let s = samples(50_000);
    let mapping = PathMapping::default().with_app_root("/var/task");
    let mut g = c.benchmark_group("cct_build");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, s| {
            b.iter(|| Cct::build_from_samples(black_box(s), &mapping, mode).escalate())
        });
    }
    g.finish();
}

fn bench_adaptive(c: &mut Criterion) {
    let spec = SimSpec {
        entry_points: 500,
        windows: 60,
        shifts: vec![10, 40],
        ..SimSpec::default()
    };
    let rows: Vec<TraceRow> = simulate(&spec, Execution::Sequential)
        .iter()
        .flat_map(|w| {
            w.counts.iter().map(move |(ep, n)| TraceRow {
                app_id: "bench".into(),
                entry_point: ep.clone(),
                timestamp_ms: w.start_ms,
                count: *n,
            })
        })
        .collect();
    let cfg = AdaptiveConfig::default();
    let mut g = c.benchmark_group("adaptive_run");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &rows, |b, r| {
            b.iter(|| run_rows(black_box(r), &cfg, mode).unwrap())
        });
    }
    g.finish();
}

fn bench_rewrite(c: &mut Criterion) {
    let files: Vec<SourceFile> = (0..200)
        .map(|i| {
            let mut text = String::from("import os\nimport heavy\nfrom heavy.sub import thing\n\n");
            for f in 0..40 {
                text.push_str(&format!(
                    "def f{f}(x):\n    y = os.sep + str(x)\n    return heavy.run(y) if x else thing(y)\n\n"
                ));
            }
            SourceFile {
                path: format!("mod{i}.py"),
                text,
            }
        })
        .collect();
    let flagged = vec!["heavy".to_string()];
    let opts = PlanOptions::default();
    let mut g = c.benchmark_group("rewrite_sources");
    g.sample_size(20);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &files, |b, f| {
            b.iter(|| rewrite_sources(black_box(f), &flagged, &opts, mode))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_parse, bench_cct, bench_adaptive, bench_rewrite);
criterion_main!(benches);
