//! Hierarchical initialization-time breakdown and the optimization gate.
//!
//! Import self-times are summed up the dotted-name hierarchy: a package's
//! time is the sum over its modules, a library's the sum over its packages,
//! and the `ALL` root holds the total across libraries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{ImportTiming, InvocationEvent};

/// Default gate: initialization must exceed this share of cold end-to-end time.
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.10;

pub const ROOT_NAME: &str = "ALL";

#[derive(Debug, Error, PartialEq)]
pub enum InitError {
    #[error("no cold-start invocations recorded")]
    NoColdStartData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitNode {
    /// Full dotted name (`nltk.sem`), or `ALL` for the root.
    pub name: String,
    pub self_time_us: u64,
    pub cumulative_time_us: u64,
    /// `cumulative_time_us` over the root's cumulative time.
    pub share_of_total: f64,
    pub children: Vec<InitNode>,
}

#[derive(Default)]
struct Builder {
    self_time: u64,
    children: BTreeMap<String, Builder>,
}

impl Builder {
    fn finish(self, name: String) -> InitNode {
        let children: Vec<InitNode> = self
            .children
            .into_iter()
            .map(|(seg, b)| {
                let full = if name == ROOT_NAME {
                    seg
                } else {
                    format!("{name}.{seg}")
                };
                b.finish(full)
            })
            .collect();
        let cumulative = self.self_time + children.iter().map(|c| c.cumulative_time_us).sum::<u64>();
        InitNode {
            name,
            self_time_us: self.self_time,
            cumulative_time_us: cumulative,
            share_of_total: 0.0,
            children,
        }
    }
}

/// Per-module mean self time over all records of that module, rounded to
/// the nearest microsecond (halves round up).
pub fn mean_self_times(imports: &[ImportTiming]) -> BTreeMap<String, u64> {
    let mut acc: BTreeMap<&str, (u128, u128)> = BTreeMap::new();
    for i in imports {
        let e = acc.entry(i.module.as_str()).or_default();
        e.0 += i.self_time_us as u128;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(m, (sum, n))| (m.to_string(), ((2 * sum + n) / (2 * n)) as u64))
        .collect()
}

/// Builds the initialization tree from import timings. Packages that never
/// reported their own timing appear with zero self time.
pub fn build_init_tree(imports: &[ImportTiming]) -> InitNode {
    build_from_means(&mean_self_times(imports))
}

pub fn build_from_means(means: &BTreeMap<String, u64>) -> InitNode {
    let mut root = Builder::default();
    for (module, us) in means {
        let mut node = &mut root;
        for seg in module.split('.') {
            node = node.children.entry(seg.to_string()).or_default();
        }
        node.self_time += us;
    }
    let mut tree = root.finish(ROOT_NAME.to_string());
    let total = tree.cumulative_time_us;
    tree.assign_shares(total);
    tree
}

impl InitNode {
    fn assign_shares(&mut self, total: u64) {
        self.share_of_total = if total == 0 {
            0.0
        } else {
            self.cumulative_time_us as f64 / total as f64
        };
        for c in &mut self.children {
            c.assign_shares(total);
        }
    }

    pub fn total_us(&self) -> u64 {
        self.cumulative_time_us
    }

    pub fn find(&self, dotted: &str) -> Option<&InitNode> {
        let mut node = self;
        let mut prefix = String::new();
        for seg in dotted.split('.') {
            if !prefix.is_empty() {
                prefix.push('.');
            }
            prefix.push_str(seg);
            node = node.children.iter().find(|c| c.name == prefix)?;
        }
        Some(node)
    }

    /// Leaf name component (`sem` for `nltk.sem`).
    pub fn short_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }

    pub fn is_package(&self) -> bool {
        !self.children.is_empty()
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a InitNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    /// Verifies `cumulative = self + Σ children cumulative` everywhere.
    pub fn check_invariants(&self) -> Result<(), String> {
        let below: u64 = self.children.iter().map(|c| c.cumulative_time_us).sum();
        if self.cumulative_time_us != self.self_time_us + below {
            return Err(self.name.clone());
        }
        self.children.iter().try_for_each(InitNode::check_invariants)
    }
}

/// Outcome of the initialization-overhead gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    /// Total initialization time over mean cold-start end-to-end time.
    #[serde(rename = "ratio")]
    pub init_ratio: f64,
    pub threshold: f64,
    pub passes: bool,
}

/// Admits an application when total initialization time strictly exceeds
/// `threshold` of the mean cold-start end-to-end time.
pub fn gate(tree: &InitNode, invocations: &[InvocationEvent], threshold: f64) -> Result<GateResult, InitError> {
    let cold: Vec<u64> = invocations
        .iter()
        .filter(|e| e.cold_start)
        .map(|e| e.e2e_time_us)
        .collect();
    if cold.is_empty() {
        return Err(InitError::NoColdStartData);
    }
    let mean = cold.iter().map(|&v| v as f64).sum::<f64>() / cold.len() as f64;
    let init_ratio = if mean > 0.0 { tree.total_us() as f64 / mean } else { 0.0 };
    Ok(gate_from_ratio(init_ratio, threshold))
}

pub fn gate_from_ratio(init_ratio: f64, threshold: f64) -> GateResult {
    GateResult {
        init_ratio,
        threshold,
        passes: init_ratio > threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imp(module: &str, us: u64) -> ImportTiming {
        ImportTiming {
            module: module.into(),
            self_time_us: us,
            invocation_id: "i".into(),
        }
    }

    fn cold(e2e: u64) -> InvocationEvent {
        InvocationEvent {
            timestamp_ms: 0,
            entry_point: "handler".into(),
            invocation_id: format!("c{e2e}"),
            e2e_time_us: e2e,
            cold_start: true,
        }
    }

    #[test]
    fn small_tree_arithmetic() {
        let tree = build_init_tree(&[imp("a", 100), imp("a.b", 50), imp("a.b.c", 25), imp("d", 25)]);
        assert_eq!(tree.total_us(), 200);
        assert_eq!(tree.find("a").unwrap().cumulative_time_us, 175);
        assert_eq!(tree.find("a.b").unwrap().cumulative_time_us, 75);
        assert_eq!(tree.find("a.b.c").unwrap().cumulative_time_us, 25);
        assert_eq!(tree.find("a").unwrap().share_of_total, 0.875);
        tree.check_invariants().unwrap();
    }

    #[test]
    fn missing_parent_packages_get_zero_self_time() {
        let tree = build_init_tree(&[imp("x.y.z", 10)]);
        let x = tree.find("x").unwrap();
        assert_eq!((x.self_time_us, x.cumulative_time_us), (0, 10));
        assert_eq!(x.children[0].name, "x.y");
    }

    #[test]
    fn empty_imports() {
        let tree = build_init_tree(&[]);
        assert_eq!(tree.name, ROOT_NAME);
        assert_eq!(tree.total_us(), 0);
        assert_eq!(tree.share_of_total, 0.0);
    }

    #[test]
    fn mean_over_cold_starts_rounds_half_up() {
        let means = mean_self_times(&[imp("m", 10), imp("m", 11), imp("n", 3), imp("n", 4), imp("n", 4)]);
        assert_eq!(means["m"], 11);
        assert_eq!(means["n"], 4);
    }

    #[test]
    fn gate_boundaries() {
        let tree = build_init_tree(&[imp("lib", 100)]);
        assert!(gate(&tree, &[cold(250)], 0.10).unwrap().passes);
        let exact = gate(&tree, &[cold(1_000)], 0.10).unwrap();
        assert_eq!(exact.init_ratio, 0.1);
        assert!(!exact.passes);
        assert!(!gate_from_ratio(0.07, 0.10).passes);
        assert_eq!(gate(&tree, &[], 0.10), Err(InitError::NoColdStartData));
    }

    #[test]
    fn gate_uses_cold_invocations_only() {
        let tree = build_init_tree(&[imp("lib", 100)]);
        let warm = InvocationEvent {
            cold_start: false,
            e2e_time_us: 1,
            ..cold(1)
        };
        let g = gate(&tree, &[cold(200), cold(300), warm], 0.1).unwrap();
        assert_eq!(g.init_ratio, 0.4);
    }
}
