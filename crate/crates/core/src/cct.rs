//! Calling context tree over stack samples, with library attribution,
//! initialization/runtime phase separation and the utilization metric.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::profile::{CallFrame, ProfileStore, StackSample};

/// Top-level package a frame belongs to. Application code is `"app"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LibraryId(String);

impl LibraryId {
    pub const APP: &'static str = "app";

    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "library ids are non-empty");
        LibraryId(name)
    }

    pub fn app() -> Self {
        LibraryId(Self::APP.to_string())
    }

    pub fn is_app(&self) -> bool {
        self.0 == Self::APP
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LibraryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where a file path lands after applying a [`PathMapping`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribution {
    pub library: LibraryId,
    /// Dotted module name (`nltk/sem/__init__.py` gives `nltk.sem`).
    pub module: Option<String>,
    /// Path shown in reports: from the library directory on, or relative to
    /// the application root.
    pub display_path: String,
    /// False when neither a library root nor the application root matched.
    pub matched: bool,
}

/// Rules for turning runtime file paths into library ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathMapping {
    /// Directory holding the application's own code.
    pub app_root: Option<String>,
    /// Directory markers whose next path segment names a library, e.g.
    /// `site-packages` or a vendored `vendor/libs`.
    pub library_roots: Vec<String>,
}

impl Default for PathMapping {
    fn default() -> Self {
        PathMapping {
            app_root: None,
            library_roots: vec!["site-packages".into(), "dist-packages".into()],
        }
    }
}

fn segments(path: &str) -> Vec<&str> {
    path.split(['/', '\\']).filter(|s| !s.is_empty() && *s != ".").collect()
}

/// Dotted module name of a file path relative to its import root.
fn module_name(rel: &[&str]) -> Option<String> {
    let (last, dirs) = rel.split_last()?;
    let stem = last.strip_suffix(".py").or_else(|| last.strip_suffix(".pyc"))?;
    let mut parts: Vec<&str> = dirs.to_vec();
    if stem != "__init__" {
        parts.push(stem);
    }
    if parts.is_empty() {
        return None;
    }
    let name = parts.join(".");
    crate::profile::is_dotted_name(&name).then_some(name)
}

impl PathMapping {
    pub fn with_app_root(mut self, root: impl Into<String>) -> Self {
        self.app_root = Some(root.into());
        self
    }

    pub fn with_library_root(mut self, root: impl Into<String>) -> Self {
        self.library_roots.push(root.into());
        self
    }

    pub fn attribute(&self, file_path: &str) -> Attribution {
        let segs = segments(file_path);

        // Longest configured root wins; among equal lengths the rightmost
        // occurrence, so nested virtualenvs resolve to the innermost one.
        let mut best: Option<(usize, usize)> = None;
        for root in &self.library_roots {
            let rsegs = segments(root);
            if rsegs.is_empty() || rsegs.len() >= segs.len() {
                continue;
            }
            for start in 0..=(segs.len() - rsegs.len()) {
                if segs[start..start + rsegs.len()] == rsegs[..] {
                    let end = start + rsegs.len();
                    let better = match best {
                        None => true,
                        Some((len, e)) => rsegs.len() > len || (rsegs.len() == len && end > e),
                    };
                    if better {
                        best = Some((rsegs.len(), end));
                    }
                }
            }
        }
        if let Some((_, end)) = best {
            let rel = &segs[end..];
            let first = rel[0];
            let lib = if rel.len() == 1 {
                first.strip_suffix(".py").unwrap_or(first)
            } else {
                first
            };
            return Attribution {
                library: LibraryId::new(lib),
                module: module_name(rel),
                display_path: rel.join("/"),
                matched: true,
            };
        }

        if let Some(root) = &self.app_root {
            let rsegs = segments(root);
            if segs.len() > rsegs.len() && segs[..rsegs.len()] == rsegs[..] {
                let rel = &segs[rsegs.len()..];
                return Attribution {
                    library: LibraryId::app(),
                    module: module_name(rel),
                    display_path: rel.join("/"),
                    matched: true,
                };
            }
        }

        let base = segs.last().copied().unwrap_or(file_path);
        Attribution {
            library: LibraryId::app(),
            module: module_name(&segs[segs.len().saturating_sub(1)..]),
            display_path: base.to_string(),
            matched: false,
        }
    }

    pub fn attribute_library(&self, frame: &CallFrame) -> LibraryId {
        self.attribute(&frame.file_path).library
    }

    /// `file:line` as shown in call-path reports.
    pub fn display_frame(&self, frame: &CallFrame) -> String {
        format!("{}:{}", self.attribute(&frame.file_path).display_path, frame.line)
    }
}

/// Whether a sample was taken while a module was being imported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initialization,
    Runtime,
}

fn is_init_frame(frame: &CallFrame, mapping: &PathMapping) -> bool {
    let basename = segments(&frame.file_path).last().copied().unwrap_or("");
    if basename == "__init__.py" && (frame.function_name == "<module>" || frame.function_name == "__init__") {
        return true;
    }
    frame.function_name == "<module>" && {
        let a = mapping.attribute(&frame.file_path);
        a.matched && !a.library.is_app()
    }
}

/// A sample is initialization-phase when any frame on its path is a library
/// module body or a package initializer; otherwise it is runtime.
pub fn classify_phase(sample: &StackSample, mapping: &PathMapping) -> Phase {
    if sample.frames.iter().any(|f| is_init_frame(f, mapping)) {
        Phase::Initialization
    } else {
        Phase::Runtime
    }
}

type FrameKey = (String, String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CctNode {
    /// Function and file of this context; `line` is the smallest line
    /// observed for it.
    pub frame: CallFrame,
    pub library: LibraryId,
    pub module: Option<String>,
    pub children: BTreeMap<FrameKey, CctNode>,
    pub exclusive_count: u64,
    pub inclusive_count: u64,
    pub init_exclusive_count: u64,
}

impl CctNode {
    fn new(frame: &CallFrame, mapping: &PathMapping) -> Self {
        let a = mapping.attribute(&frame.file_path);
        CctNode {
            frame: frame.clone(),
            library: a.library,
            module: a.module,
            children: BTreeMap::new(),
            exclusive_count: 0,
            inclusive_count: 0,
            init_exclusive_count: 0,
        }
    }

    fn root() -> Self {
        CctNode {
            frame: CallFrame::new("<root>", "<root>", 1),
            library: LibraryId::app(),
            module: None,
            children: BTreeMap::new(),
            exclusive_count: 0,
            inclusive_count: 0,
            init_exclusive_count: 0,
        }
    }

    pub fn runtime_exclusive_count(&self) -> u64 {
        self.exclusive_count - self.init_exclusive_count
    }

    fn merge(&mut self, other: CctNode) {
        self.frame.line = self.frame.line.min(other.frame.line);
        self.exclusive_count += other.exclusive_count;
        self.inclusive_count += other.inclusive_count;
        self.init_exclusive_count += other.init_exclusive_count;
        for (key, child) in other.children {
            match self.children.get_mut(&key) {
                Some(mine) => mine.merge(child),
                None => {
                    self.children.insert(key, child);
                }
            }
        }
    }

    fn escalate(&mut self) -> u64 {
        let below: u64 = self.children.values_mut().map(CctNode::escalate).sum();
        self.inclusive_count = self.exclusive_count + below;
        self.inclusive_count
    }

    /// Depth-first walk; `f` receives each node with its ancestors
    /// (root excluded) from the top down.
    fn walk<'a>(&'a self, stack: &mut Vec<&'a CctNode>, f: &mut impl FnMut(&'a CctNode, &[&'a CctNode])) {
        for child in self.children.values() {
            f(child, stack);
            stack.push(child);
            child.walk(stack, f);
            stack.pop();
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.values().map(CctNode::node_count).sum::<usize>()
    }
}

/// A root-to-node path together with the node's inclusive count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallPath {
    pub frames: Vec<CallFrame>,
    pub count: u64,
}

/// Calling context tree. The synthetic root's children are handler frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cct {
    pub root: CctNode,
    /// File paths no mapping rule matched (attributed to the application).
    pub unmatched_paths: BTreeSet<String>,
    escalated: bool,
}

impl Default for Cct {
    fn default() -> Self {
        Cct {
            root: CctNode::root(),
            unmatched_paths: BTreeSet::new(),
            escalated: false,
        }
    }
}

impl Cct {
    /// Builds the tree from every sample in the store, one node per distinct
    /// calling context. Counts are exclusive only; call [`Cct::escalate`]
    /// before reading inclusive counts.
    pub fn build(store: &ProfileStore, mapping: &PathMapping, exec: Execution) -> Cct {
        Self::build_from_samples(&store.samples, mapping, exec)
    }

    pub fn build_from_samples(samples: &[StackSample], mapping: &PathMapping, exec: Execution) -> Cct {
        exec.fold_chunks(
            samples,
            Cct::default,
            |mut cct, sample| {
                cct.insert(sample, mapping);
                cct
            },
            |mut a, b| {
                a.merge(b);
                a
            },
        )
    }

    pub fn insert(&mut self, sample: &StackSample, mapping: &PathMapping) {
        let phase = classify_phase(sample, mapping);
        let mut unmatched = Vec::new();
        let mut node = &mut self.root;
        for frame in &sample.frames {
            let key = (frame.function_name.clone(), frame.file_path.clone());
            let child = node.children.entry(key).or_insert_with(|| {
                if !mapping.attribute(&frame.file_path).matched {
                    unmatched.push(frame.file_path.clone());
                }
                CctNode::new(frame, mapping)
            });
            child.frame.line = child.frame.line.min(frame.line);
            node = child;
        }
        node.exclusive_count += 1;
        if phase == Phase::Initialization {
            node.init_exclusive_count += 1;
        }
        self.unmatched_paths.extend(unmatched);
        self.escalated = false;
    }

    pub fn merge(&mut self, other: Cct) {
        self.root.merge(other.root);
        self.unmatched_paths.extend(other.unmatched_paths);
        self.escalated = false;
    }

    /// Propagates counts toward the root so that every node's inclusive
    /// count covers its whole subtree.
    pub fn escalate(mut self) -> Cct {
        self.root.escalate();
        self.escalated = true;
        self
    }

    pub fn is_escalated(&self) -> bool {
        self.escalated
    }

    pub fn total_samples(&self) -> u64 {
        let mut total = self.root.exclusive_count;
        self.for_each_node(|n, _| total += n.exclusive_count);
        total
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn for_each_node<'a>(&'a self, mut f: impl FnMut(&'a CctNode, &[&'a CctNode])) {
        let mut stack = Vec::new();
        self.root.walk(&mut stack, &mut f);
    }

    /// Checks `inclusive = exclusive + Σ children inclusive` and
    /// `init_exclusive ≤ exclusive` at every node. Returns the first
    /// offending node's frame.
    pub fn check_invariants(&self) -> Result<(), CallFrame> {
        fn check(n: &CctNode) -> Result<(), CallFrame> {
            let below: u64 = n.children.values().map(|c| c.inclusive_count).sum();
            if n.inclusive_count != n.exclusive_count + below || n.init_exclusive_count > n.exclusive_count {
                return Err(n.frame.clone());
            }
            n.children.values().try_for_each(check)
        }
        check(&self.root)
    }

    /// Paths from the root to every node where `matches` becomes true (the
    /// node matches and its parent does not), heaviest first.
    pub fn entry_paths(&self, matches: impl Fn(&CctNode) -> bool) -> Vec<CallPath> {
        let mut out = Vec::new();
        self.for_each_node(|node, ancestors| {
            let parent_matches = ancestors.last().is_some_and(|p| matches(p));
            if matches(node) && !parent_matches {
                let mut frames: Vec<CallFrame> = ancestors.iter().map(|a| a.frame.clone()).collect();
                frames.push(node.frame.clone());
                out.push(CallPath {
                    frames,
                    count: node.inclusive_count,
                });
            }
        });
        out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.frames.cmp(&b.frames)));
        out
    }
}

/// True when `module` is `target` or lies underneath it.
pub fn module_under(module: &str, target: &str) -> bool {
    module == target
        || (module.len() > target.len() && module.starts_with(target) && module.as_bytes()[target.len()] == b'.')
}

/// Per-library sample attribution and utilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryStats {
    pub library: LibraryId,
    pub runtime_exclusive_samples: u64,
    pub init_samples: u64,
    /// Share of all runtime samples whose leaf context belongs to this
    /// library, in `[0, 1]`.
    pub utilization: f64,
    pub call_paths: Vec<CallPath>,
}

/// Utilization of every library seen in the tree, sorted by library id.
///
/// `S(f)` is the runtime exclusive count of each calling context:
/// initialization-phase samples are excluded from both the numerator and the
/// denominator. With no runtime samples every utilization is 0.
pub fn library_stats(cct: &Cct) -> Vec<LibraryStats> {
    let cct_owned;
    let cct = if cct.is_escalated() {
        cct
    } else {
        cct_owned = cct.clone().escalate();
        &cct_owned
    };

    let mut runtime: BTreeMap<LibraryId, u64> = BTreeMap::new();
    let mut init: BTreeMap<LibraryId, u64> = BTreeMap::new();
    cct.for_each_node(|n, _| {
        *runtime.entry(n.library.clone()).or_default() += n.runtime_exclusive_count();
        *init.entry(n.library.clone()).or_default() += n.init_exclusive_count;
    });
    let total: u64 = runtime.values().sum();

    runtime
        .into_iter()
        .map(|(library, samples)| {
            let call_paths = cct.entry_paths(|n| n.library == library);
            LibraryStats {
                init_samples: init.get(&library).copied().unwrap_or(0),
                utilization: if total == 0 { 0.0 } else { samples as f64 / total as f64 },
                runtime_exclusive_samples: samples,
                call_paths,
                library,
            }
        })
        .collect()
}

/// Escalated tree plus its library statistics: everything the detector
/// needs from the sampling side.
#[derive(Debug, Clone)]
pub struct Usage {
    pub cct: Cct,
    pub stats: Vec<LibraryStats>,
    pub total_runtime_samples: u64,
    pub mapping: PathMapping,
}

impl Usage {
    pub fn from_store(store: &ProfileStore, mapping: &PathMapping, exec: Execution) -> Usage {
        Self::from_cct(Cct::build(store, mapping, exec).escalate(), mapping.clone())
    }

    pub fn from_cct(cct: Cct, mapping: PathMapping) -> Usage {
        let cct = if cct.is_escalated() { cct } else { cct.escalate() };
        let stats = library_stats(&cct);
        let total_runtime_samples = stats.iter().map(|s| s.runtime_exclusive_samples).sum();
        Usage {
            cct,
            stats,
            total_runtime_samples,
            mapping,
        }
    }

    pub fn library(&self, name: &str) -> Option<&LibraryStats> {
        self.stats.iter().find(|s| s.library.as_str() == name)
    }

    pub fn utilization(&self, library: &str) -> f64 {
        self.library(library).map_or(0.0, |s| s.utilization)
    }

    /// Utilization of a dotted module prefix such as `nltk.sem`.
    pub fn module_utilization(&self, target: &str) -> f64 {
        if self.total_runtime_samples == 0 {
            return 0.0;
        }
        let mut samples = 0;
        self.cct.for_each_node(|n, _| {
            if n.module.as_deref().is_some_and(|m| module_under(m, target)) && !n.library.is_app() {
                samples += n.runtime_exclusive_count();
            }
        });
        samples as f64 / self.total_runtime_samples as f64
    }

    pub fn module_call_paths(&self, target: &str) -> Vec<CallPath> {
        self.cct
            .entry_paths(|n| !n.library.is_app() && n.module.as_deref().is_some_and(|m| module_under(m, target)))
    }

    /// Top-level module names that belong to the application itself.
    pub fn app_modules(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.cct.for_each_node(|n, _| {
            if n.library.is_app() {
                if let Some(m) = &n.module {
                    out.insert(m.split('.').next().unwrap_or(m).to_string());
                }
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(frames: &[(&str, &str)]) -> StackSample {
        StackSample {
            timestamp_ms: 0,
            invocation_id: "i".into(),
            entry_point: frames[0].0.into(),
            frames: frames
                .iter()
                .enumerate()
                .map(|(i, (f, p))| CallFrame::new(*f, *p, i as u32 + 1))
                .collect(),
        }
    }

    fn mapping() -> PathMapping {
        PathMapping::default().with_app_root("/var/task")
    }

    #[test]
    fn attributes_site_packages_and_app() {
        let m = mapping();
        let a = m.attribute("/opt/python/lib/python3.9/site-packages/nltk/sem/__init__.py");
        assert_eq!(a.library.as_str(), "nltk");
        assert_eq!(a.module.as_deref(), Some("nltk.sem"));
        assert_eq!(a.display_path, "nltk/sem/__init__.py");
        assert_eq!(
            m.attribute("/x/site-packages/xmlschema/__init__.py").library.as_str(),
            "xmlschema"
        );
        assert_eq!(m.attribute("/x/dist-packages/six.py").library.as_str(), "six");

        let app = m.attribute("/var/task/handler.py");
        assert!(app.library.is_app() && app.matched);
        assert_eq!(app.module.as_deref(), Some("handler"));

        let rel = PathMapping::default().with_app_root("app").attribute("app/handler.py");
        assert!(rel.library.is_app() && rel.matched);

        let odd = m.attribute("<frozen importlib._bootstrap>");
        assert!(odd.library.is_app() && !odd.matched);
    }

    #[test]
    fn longest_root_wins() {
        let m = PathMapping::default().with_library_root("site-packages/vendored");
        let a = m.attribute("/v/site-packages/vendored/requests/api.py");
        assert_eq!(a.library.as_str(), "requests");
        let nested = PathMapping::default().attribute("/a/site-packages/tool/env/site-packages/numpy/core.py");
        assert_eq!(nested.library.as_str(), "numpy");
    }

    #[test]
    fn phase_classification() {
        let m = mapping();
        let init = sample(&[
            ("handler", "/var/task/handler.py"),
            ("<module>", "/s/site-packages/pkg/__init__.py"),
        ]);
        assert_eq!(classify_phase(&init, &m), Phase::Initialization);
        let run = sample(&[
            ("handler", "/var/task/handler.py"),
            ("compute", "/s/site-packages/pkg/core.py"),
        ]);
        assert_eq!(classify_phase(&run, &m), Phase::Runtime);
        let body = sample(&[
            ("handler", "/var/task/handler.py"),
            ("<module>", "/s/site-packages/pkg/core.py"),
        ]);
        assert_eq!(classify_phase(&body, &m), Phase::Initialization);
        // An app module body is not a library import.
        let app_body = sample(&[("handler", "/var/task/handler.py"), ("<module>", "/var/task/util.py")]);
        assert_eq!(classify_phase(&app_body, &m), Phase::Runtime);
        let ctor = sample(&[
            ("handler", "/var/task/handler.py"),
            ("__init__", "/var/task/pkg/__init__.py"),
        ]);
        assert_eq!(classify_phase(&ctor, &m), Phase::Initialization);
    }

    #[test]
    fn distinct_contexts_for_same_function() {
        let m = mapping();
        let samples = vec![
            sample(&[
                ("handler", "/var/task/handler.py"),
                ("a", "/s/site-packages/l/a.py"),
                ("b", "/s/site-packages/l/b.py"),
            ]),
            sample(&[
                ("handler", "/var/task/handler.py"),
                ("a", "/s/site-packages/l/a.py"),
                ("c", "/s/site-packages/l/c.py"),
                ("b", "/s/site-packages/l/b.py"),
            ]),
        ];
        let cct = Cct::build_from_samples(&samples, &m, Execution::Sequential);
        let mut b_nodes = 0;
        cct.for_each_node(|n, _| b_nodes += usize::from(n.frame.function_name == "b"));
        assert_eq!(b_nodes, 2);
    }

    #[test]
    fn empty_store_gives_root_only_tree() {
        let cct = Cct::build(&ProfileStore::default(), &mapping(), Execution::Parallel).escalate();
        assert_eq!(cct.node_count(), 1);
        assert_eq!(cct.root.inclusive_count, 0);
        assert!(library_stats(&cct).is_empty());
    }

    #[test]
    fn identical_samples_collapse() {
        let s = sample(&[("handler", "/var/task/handler.py")]);
        let samples = vec![s; 100];
        let cct = Cct::build_from_samples(&samples, &mapping(), Execution::Parallel).escalate();
        assert_eq!(cct.root.children.len(), 1);
        let only = cct.root.children.values().next().unwrap();
        assert_eq!(only.exclusive_count, 100);
        assert_eq!(cct.root.inclusive_count, 100);
    }

    #[test]
    fn escalation_of_a_chain() {
        let m = mapping();
        let a = ("handler", "/var/task/handler.py");
        let b = ("b", "/s/site-packages/l/b.py");
        let c = ("c", "/s/site-packages/l/c.py");
        let mut samples = vec![sample(&[a])];
        samples.extend(std::iter::repeat_n(sample(&[a, b]), 2));
        samples.extend(std::iter::repeat_n(sample(&[a, b, c]), 3));
        let cct = Cct::build_from_samples(&samples, &m, Execution::Sequential).escalate();
        let na = cct.root.children.values().next().unwrap();
        let nb = na.children.values().next().unwrap();
        let nc = nb.children.values().next().unwrap();
        assert_eq!((na.inclusive_count, nb.inclusive_count, nc.inclusive_count), (6, 5, 3));
        assert_eq!(nc.inclusive_count, nc.exclusive_count);
        cct.check_invariants().unwrap();
    }

    #[test]
    fn utilization_partitions_runtime_samples() {
        let m = mapping();
        let h = ("handler", "/var/task/handler.py");
        let mut samples = Vec::new();
        samples.extend(std::iter::repeat_n(sample(&[h, ("f", "/s/site-packages/one/x.py")]), 3));
        samples.push(sample(&[h, ("g", "/s/site-packages/two/y.py")]));
        samples.push(sample(&[h, ("<module>", "/s/site-packages/three/__init__.py")]));
        let cct = Cct::build_from_samples(&samples, &m, Execution::Sequential).escalate();
        let stats = library_stats(&cct);
        let by = |n: &str| stats.iter().find(|s| s.library.as_str() == n).unwrap();
        assert_eq!(by("one").utilization, 0.75);
        assert_eq!(by("two").utilization, 0.25);
        assert_eq!(by("three").utilization, 0.0);
        assert_eq!(by("three").init_samples, 1);
        let total: f64 = stats.iter().map(|s| s.utilization).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(by("one").call_paths[0].count, 3);
    }

    #[test]
    fn single_library_takes_everything() {
        let samples = vec![sample(&[("handler", "/var/task/handler.py")]); 7];
        let cct = Cct::build_from_samples(&samples, &mapping(), Execution::Sequential).escalate();
        let stats = library_stats(&cct);
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].utilization, 1.0);
    }

    #[test]
    fn module_prefix_matching() {
        assert!(module_under("nltk.sem", "nltk.sem"));
        assert!(module_under("nltk.sem.logic", "nltk.sem"));
        assert!(!module_under("nltk.semantic", "nltk.sem"));
        assert!(!module_under("nltk", "nltk.sem"));
    }
}
