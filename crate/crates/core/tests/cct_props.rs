use std::collections::BTreeMap;
use std::time::Instant;

use pgo_core::cct::{classify_phase, library_stats, Cct, PathMapping, Phase};
use pgo_core::profile::{CallFrame, StackSample};
use pgo_core::Execution;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SP: &str = "/env/lib/python3.10/site-packages";

fn mapping() -> PathMapping {
    PathMapping::default().with_app_root("/var/task")
}

/// Random root-first stack: handler, then frames from up to 8 libraries,
/// sometimes passing through a module body so the sample is init-phase.
fn random_sample(rng: &mut impl Rng, ts: i64) -> StackSample {
    let depth = rng.gen_range(1..=12);
    let mut frames = vec![CallFrame::new("handler", "/var/task/handler.py", rng.gen_range(1..5))];
    for _ in 1..depth {
        let frame = match rng.gen_range(0..10) {
            0 => CallFrame::new("helper", "/var/task/util.py", rng.gen_range(1..30)),
            1 => {
                let lib = rng.gen_range(0..8);
                CallFrame::new("<module>", format!("{SP}/lib{lib}/__init__.py"), rng.gen_range(1..50))
            }
            _ => {
                let lib = rng.gen_range(0..8);
                let func = ["run", "step", "load", "emit"][rng.gen_range(0..4)];
                let file = ["core.py", "io.py"][rng.gen_range(0..2)];
                CallFrame::new(func, format!("{SP}/lib{lib}/{file}"), rng.gen_range(1..200))
            }
        };
        frames.push(frame);
    }
    StackSample {
        timestamp_ms: ts,
        invocation_id: format!("inv{}", ts % 7),
        entry_point: "handler.handler".into(),
        frames,
    }
}

fn random_samples(seed: u64, n: usize) -> Vec<StackSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_sample(&mut rng, i as i64)).collect()
}

/// Independent flat recount: the leaf library of every runtime sample.
fn flat_utilization(samples: &[StackSample], mapping: &PathMapping) -> BTreeMap<String, (u64, u64)> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0;
    for s in samples {
        let lib = mapping.attribute(&s.leaf().file_path).library.to_string();
        counts.entry(lib.clone()).or_insert(0);
        if classify_phase(s, mapping) == Phase::Runtime {
            *counts.get_mut(&lib).unwrap() += 1;
            total += 1;
        }
    }
    counts.into_iter().map(|(k, v)| (k, (v, total))).collect()
}

#[test]
fn thousand_random_samples_match_flat_recount() {
    let started = Instant::now();
    let mapping = mapping();
    let samples = random_samples(42, 1_000);
    let cct = Cct::build_from_samples(&samples, &mapping, Execution::default()).escalate();
    cct.check_invariants().unwrap();
    assert_eq!(cct.root.inclusive_count, 1_000);
    assert_eq!(cct.total_samples(), 1_000);

    let stats = library_stats(&cct);
    let oracle = flat_utilization(&samples, &mapping);
    let mut sum = 0.0;
    for s in &stats {
        let (n, total) = oracle[s.library.as_str()];
        assert_eq!(s.runtime_exclusive_samples, n, "{}", s.library);
        assert_eq!(s.utilization, n as f64 / total as f64, "{}", s.library);
        sum += s.utilization;
    }
    assert_eq!(stats.len(), oracle.len());
    assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn sequential_and_parallel_builds_agree() {
    let mapping = mapping();
    let samples = random_samples(9, 5_000);
    let a = Cct::build_from_samples(&samples, &mapping, Execution::Sequential).escalate();
    let b = Cct::build_from_samples(&samples, &mapping, Execution::Parallel).escalate();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn escalation_invariant_and_root_total(seed in any::<u64>(), n in 0usize..300) {
        let mapping = mapping();
        let samples = random_samples(seed, n);
        let cct = Cct::build_from_samples(&samples, &mapping, Execution::default()).escalate();
        prop_assert!(cct.check_invariants().is_ok());
        prop_assert_eq!(cct.root.inclusive_count, n as u64);
        let stats = library_stats(&cct);
        let runtime: u64 = stats.iter().map(|s| s.runtime_exclusive_samples).sum();
        if runtime > 0 {
            let sum: f64 = stats.iter().map(|s| s.utilization).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
        for s in &stats {
            prop_assert!((0.0..=1.0).contains(&s.utilization));
        }
    }

    #[test]
    fn sample_order_does_not_matter(seed in any::<u64>(), n in 1usize..200, rot in 0usize..200) {
        let mapping = mapping();
        let samples = random_samples(seed, n);
        let mut rotated = samples.clone();
        rotated.rotate_left(rot % n);
        let a = Cct::build_from_samples(&samples, &mapping, Execution::Sequential).escalate();
        let b = Cct::build_from_samples(&rotated, &mapping, Execution::Parallel).escalate();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn merging_halves_equals_building_whole(seed in any::<u64>(), n in 0usize..200, cut in 0usize..200) {
        let mapping = mapping();
        let samples = random_samples(seed, n);
        let cut = if n == 0 { 0 } else { cut % n };
        let mut left = Cct::build_from_samples(&samples[..cut], &mapping, Execution::Sequential);
        left.merge(Cct::build_from_samples(&samples[cut..], &mapping, Execution::Sequential));
        let whole = Cct::build_from_samples(&samples, &mapping, Execution::Sequential);
        prop_assert_eq!(left.escalate(), whole.escalate());
    }
}
