//! Inefficient-library detection and the optimization report.
//!
//! A library is a candidate when its share of initialization time is at
//! least `min_init_share`. Candidates with no runtime samples are `unused`,
//! those under `utilization_threshold` are `infrequent`. A library that is
//! used often enough but has cold sub-packages is reported as `partial`,
//! listing just those sub-packages so they can be deferred on their own.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cct::{CallPath, LibraryId, PathMapping, Usage};
use crate::exec::Execution;
use crate::init::{self, GateResult, InitError, InitNode};
use crate::profile::ProfileStore;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("unknown report format `{0}` (expected json or markdown)")]
    UnknownFormat(String),
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Init(#[from] InitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub utilization_threshold: f64,
    pub min_init_share: f64,
    pub gate_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            utilization_threshold: 0.02,
            min_init_share: 0.05,
            gate_threshold: init::DEFAULT_GATE_THRESHOLD,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        for (name, v) in [
            ("utilization_threshold", self.utilization_threshold),
            ("min_init_share", self.min_init_share),
            ("gate_threshold", self.gate_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(DetectError::InvalidConfig(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Unused,
    Infrequent,
    /// The library itself is used; only its listed sub-packages are cold.
    Partial,
}

impl FindingKind {
    /// Whether the whole library should be deferred.
    pub fn defers_library(self) -> bool {
        matches!(self, FindingKind::Unused | FindingKind::Infrequent)
    }

    fn classify(utilization: f64, threshold: f64) -> Option<FindingKind> {
        if utilization == 0.0 {
            Some(FindingKind::Unused)
        } else if utilization < threshold {
            Some(FindingKind::Infrequent)
        } else {
            None
        }
    }
}

/// A call path in report form: frames are `[function, display path, line]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCallPath {
    pub path: Vec<(String, String, u32)>,
    pub count: u64,
}

impl ReportCallPath {
    fn from_path(path: &CallPath, mapping: &PathMapping) -> Self {
        ReportCallPath {
            path: path
                .frames
                .iter()
                .map(|f| {
                    (
                        f.function_name.clone(),
                        mapping.attribute(&f.file_path).display_path,
                        f.line,
                    )
                })
                .collect(),
            count: path.count,
        }
    }

    /// `handler.py:11 → cve_bin_tool/cli.py:71 → …`
    pub fn arrow_chain(&self) -> String {
        self.path
            .iter()
            .map(|(_, file, line)| format!("{file}:{line}"))
            .collect::<Vec<_>>()
            .join(" → ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpackageFinding {
    pub name: String,
    pub init_share_pct: f64,
    pub kind: FindingKind,
    pub utilization_pct: f64,
    pub file: String,
    #[serde(default)]
    pub call_paths: Vec<ReportCallPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub library: LibraryId,
    pub kind: FindingKind,
    pub utilization_pct: f64,
    pub init_overhead_pct: f64,
    pub files: Vec<String>,
    #[serde(rename = "call_paths")]
    pub top_call_paths: Vec<ReportCallPath>,
    #[serde(rename = "subpackages")]
    pub flagged_subpackages: Vec<SubpackageFinding>,
}

impl Finding {
    /// Dotted module names the rewriter should defer for this finding.
    pub fn deferral_targets(&self) -> Vec<String> {
        if self.kind.defers_library() {
            vec![self.library.to_string()]
        } else {
            self.flagged_subpackages.iter().map(|s| s.name.clone()).collect()
        }
    }
}

const TOP_CALL_PATHS: usize = 3;

/// A module is a package when it has sub-modules in the init tree or when a
/// sampled frame ran its `__init__.py`.
fn is_package(node: &InitNode, usage: &Usage) -> bool {
    if node.is_package() {
        return true;
    }
    let mut seen = false;
    usage.cct.for_each_node(|n, _| {
        if !seen && n.module.as_deref() == Some(node.name.as_str()) {
            seen = n.frame.file_path.ends_with("__init__.py");
        }
    });
    seen
}

fn init_file(node: &InitNode, usage: &Usage, top_level: bool) -> String {
    let rel = node.name.replace('.', "/");
    let file = if is_package(node, usage) {
        format!("{rel}/__init__.py")
    } else {
        format!("{rel}.py")
    };
    if top_level {
        format!("../{file}")
    } else {
        file
    }
}

fn cold_subpackages(node: &InitNode, usage: &Usage, cfg: &DetectorConfig, out: &mut Vec<SubpackageFinding>) {
    for child in &node.children {
        if child.share_of_total < cfg.min_init_share {
            continue;
        }
        let util = usage.module_utilization(&child.name);
        match FindingKind::classify(util, cfg.utilization_threshold) {
            Some(kind) => out.push(SubpackageFinding {
                name: child.name.clone(),
                init_share_pct: child.share_of_total * 100.0,
                kind,
                utilization_pct: util * 100.0,
                file: init_file(child, usage, false),
                call_paths: usage
                    .module_call_paths(&child.name)
                    .iter()
                    .take(TOP_CALL_PATHS)
                    .map(|p| ReportCallPath::from_path(p, &usage.mapping))
                    .collect(),
            }),
            None => cold_subpackages(child, usage, cfg, out),
        }
    }
}

/// Flags libraries whose initialization cost is not matched by runtime use.
/// Findings are ordered by initialization share (descending), then name.
pub fn detect(usage: &Usage, tree: &InitNode, cfg: &DetectorConfig) -> Vec<Finding> {
    let app_modules = usage.app_modules();
    let mut findings = Vec::new();
    for lib in &tree.children {
        if lib.name == LibraryId::APP || app_modules.contains(&lib.name) {
            continue;
        }
        if lib.share_of_total < cfg.min_init_share {
            continue;
        }
        let util = usage.utilization(&lib.name);
        let mut subs = Vec::new();
        cold_subpackages(lib, usage, cfg, &mut subs);
        subs.sort_by(|a, b| {
            b.init_share_pct
                .total_cmp(&a.init_share_pct)
                .then_with(|| a.name.cmp(&b.name))
        });
        let kind = match FindingKind::classify(util, cfg.utilization_threshold) {
            Some(k) => k,
            None if !subs.is_empty() => FindingKind::Partial,
            None => continue,
        };
        let top_call_paths = usage
            .library(&lib.name)
            .map(|s| {
                s.call_paths
                    .iter()
                    .take(TOP_CALL_PATHS)
                    .map(|p| ReportCallPath::from_path(p, &usage.mapping))
                    .collect()
            })
            .unwrap_or_default();
        findings.push(Finding {
            library: LibraryId::new(lib.name.clone()),
            kind,
            utilization_pct: util * 100.0,
            init_overhead_pct: lib.share_of_total * 100.0,
            files: vec![init_file(lib, usage, true)],
            top_call_paths,
            flagged_subpackages: subs,
        });
    }
    findings.sort_by(|a, b| {
        b.init_overhead_pct
            .total_cmp(&a.init_overhead_pct)
            .then_with(|| a.library.cmp(&b.library))
    });
    findings
}

/// Machine-readable report consumed by the rewriter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub app: String,
    pub gate: GateResult,
    pub findings: Vec<Finding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Report, DetectError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Every module the rewriter should defer, sorted and deduplicated.
    pub fn deferral_targets(&self) -> Vec<String> {
        let mut out: Vec<String> = self.findings.iter().flat_map(Finding::deferral_targets).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Full analysis: init tree, gate, and (when the gate passes) usage-based
/// detection.
pub fn analyze_store(
    store: &ProfileStore,
    mapping: &PathMapping,
    cfg: &DetectorConfig,
    exec: Execution,
) -> Result<Report, DetectError> {
    cfg.validate()?;
    let tree = init::build_init_tree(&store.imports);
    let gate = init::gate(&tree, &store.invocations, cfg.gate_threshold)?;
    let mut report = Report {
        app: store.app_id.clone(),
        gate,
        findings: Vec::new(),
        warnings: Vec::new(),
    };
    if !report.gate.passes {
        return Ok(report);
    }
    let usage = Usage::from_store(store, mapping, exec);
    for s in &usage.stats {
        if !s.library.is_app() && tree.find(s.library.as_str()).is_none() {
            report.warnings.push(format!(
                "library `{}` was sampled but has no import timing; its initialization time is taken as 0",
                s.library
            ));
        }
    }
    if !usage.cct.unmatched_paths.is_empty() {
        report.warnings.push(format!(
            "{} file path(s) matched no library root and were attributed to the application",
            usage.cct.unmatched_paths.len()
        ));
    }
    report.findings = detect(&usage, &tree, cfg);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(DetectError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn render_report(report: &Report, format: &str) -> Result<String, DetectError> {
    Ok(match format.parse::<ReportFormat>()? {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Markdown => render_markdown(report),
    })
}

fn cmp_pct(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

pub fn render_markdown(report: &Report) -> String {
    let mut out = String::new();
    let app = if report.app.is_empty() { "unknown" } else { &report.app };
    let _ = writeln!(out, "# Library initialization report\n");
    let _ = writeln!(out, "**Application:** {app}\n");
    let g = &report.gate;
    let verdict = if g.passes { "above threshold" } else { "below threshold" };
    let _ = writeln!(
        out,
        "Initialization to end-to-end ratio: {:.4} (threshold {:.2}, {verdict})\n",
        g.init_ratio, g.threshold
    );

    if !g.passes {
        let _ = writeln!(
            out,
            "Initialization overhead is below threshold; no libraries were analyzed."
        );
    } else if report.findings.is_empty() {
        let _ = writeln!(
            out,
            "No findings: no library combines significant initialization overhead with low utilization."
        );
    } else {
        let _ = writeln!(out, "## Summary\n");
        let _ = writeln!(out, "| | Package | Util. | Init. Overhead | File |");
        let _ = writeln!(out, "|---|---|---:|---:|---|");
        for f in &report.findings {
            let marker = if f.kind.defers_library() { "+" } else { "-" };
            let _ = writeln!(
                out,
                "| {marker} | {} | {:.2} | {:.2} | {} |",
                f.library,
                f.utilization_pct,
                f.init_overhead_pct,
                f.files.join(", ")
            );
            let mut subs: Vec<&SubpackageFinding> = f.flagged_subpackages.iter().collect();
            subs.sort_by(|a, b| cmp_pct(a.init_share_pct, b.init_share_pct).then_with(|| a.name.cmp(&b.name)));
            for s in subs {
                let _ = writeln!(
                    out,
                    "| + | {} | {:.2} | {:.2} | {} |",
                    s.name, s.utilization_pct, s.init_share_pct, s.file
                );
            }
        }

        let _ = writeln!(out, "\n## Call Path\n");
        let _ = writeln!(out, "| | Package | Path |");
        let _ = writeln!(out, "|---|---|---|");
        for f in &report.findings {
            if f.kind.defers_library() {
                for p in &f.top_call_paths {
                    let _ = writeln!(
                        out,
                        "| - | {} | `{}` ({} samples) |",
                        f.library,
                        p.arrow_chain(),
                        p.count
                    );
                }
            }
            for s in &f.flagged_subpackages {
                for p in &s.call_paths {
                    let _ = writeln!(out, "| - | {} | `{}` ({} samples) |", s.name, p.arrow_chain(), p.count);
                }
            }
        }
    }

    if !report.warnings.is_empty() {
        let _ = writeln!(out, "\n## Warnings\n");
        for w in &report.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}
