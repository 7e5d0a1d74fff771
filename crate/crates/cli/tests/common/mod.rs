#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn demo() -> PathBuf {
    fixtures().join("demo")
}

/// Runs the `pgo` binary with a clean environment for config lookup.
pub fn pgo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgo"))
        .args(args)
        .env_remove("PGO_CONFIG")
        .output()
        .expect("pgo binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn only_subdir(dir: &Path) -> PathBuf {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(entries.len(), 1, "{entries:?}");
    entries.pop().unwrap()
}

pub fn copy_tree(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(from).unwrap();
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).unwrap();
        } else {
            std::fs::copy(entry.path(), &dest).unwrap();
        }
    }
}

/// Windows where the exact rational l1 distance between consecutive
/// non-empty windows of a bucketed CSV exceeds `eps_num / eps_den`.
pub fn oracle_fires(csv: &str, window_ms: i64, eps_num: u128, eps_den: u128) -> Vec<usize> {
    let mut rows = Vec::new();
    for l in csv.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        rows.push((
            f[1].to_string(),
            f[2].parse::<i64>().unwrap(),
            f[3].parse::<u128>().unwrap(),
        ));
    }
    let start = rows.iter().map(|r| r.1).min().unwrap();
    let mut counts: BTreeMap<usize, BTreeMap<String, u128>> = BTreeMap::new();
    for (ep, ts, n) in rows {
        *counts
            .entry(((ts - start) / window_ms) as usize)
            .or_default()
            .entry(ep)
            .or_default() += n;
    }
    let last = *counts.keys().max().unwrap();
    let mut fires = Vec::new();
    for w in 1..=last {
        let (Some(a), Some(b)) = (counts.get(&(w - 1)), counts.get(&w)) else {
            continue;
        };
        let t1: u128 = a.values().sum();
        let t2: u128 = b.values().sum();
        if t1 == 0 || t2 == 0 {
            continue;
        }
        let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
        let l1: u128 = keys
            .into_iter()
            .map(|k| (a.get(k).copied().unwrap_or(0) * t2).abs_diff(b.get(k).copied().unwrap_or(0) * t1))
            .sum();
        if l1 * eps_den > eps_num * t1 * t2 {
            fires.push(w);
        }
    }
    fires
}
