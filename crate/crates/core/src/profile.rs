//! Profile data model, newline-delimited wire format and batch merging.
//!
//! One record per line:
//!
//! ```text
//! {"k":"sample","ts":<ms>,"inv":<id>,"ep":<entry>,"fr":[[fn,file,line],...]}
//! {"k":"imp","inv":<id>,"mod":<dotted>,"self_us":<us>}
//! {"k":"invk","ts":<ms>,"inv":<id>,"ep":<entry>,"e2e_us":<us>,"cold":<bool>}
//! {"k":"meta","app":<id>,"agent_ver":<ver>,"hz":<number>}
//! ```
//!
//! Stack frames are root-first. Times are integers; import times are *self*
//! times that exclude nested imports, so sums over any module set are exact.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;

/// File extension used for batch and store files.
pub const BATCH_EXTENSION: &str = "pgoprof.jsonl";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("malformed record{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    MalformedRecord { line: Option<usize>, reason: String },

    #[error("no profile batches supplied")]
    EmptyInput,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ProfileError {
    fn malformed(reason: impl Into<String>) -> Self {
        ProfileError::MalformedRecord {
            line: None,
            reason: reason.into(),
        }
    }

    fn at_line(self, line: usize) -> Self {
        match self {
            ProfileError::MalformedRecord { reason, .. } => ProfileError::MalformedRecord {
                line: Some(line),
                reason,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, ProfileError>;

/// A single frame of a sampled call stack.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallFrame {
    pub function_name: String,
    pub file_path: String,
    pub line: u32,
}

impl CallFrame {
    pub fn new(function_name: impl Into<String>, file_path: impl Into<String>, line: u32) -> Self {
        CallFrame {
            function_name: function_name.into(),
            file_path: file_path.into(),
            line,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.function_name.is_empty() {
            return Err(ProfileError::malformed("frame with empty function name"));
        }
        if self.file_path.is_empty() {
            return Err(ProfileError::malformed("frame with empty file path"));
        }
        if self.line == 0 {
            return Err(ProfileError::malformed("frame line numbers start at 1"));
        }
        Ok(())
    }
}

impl fmt::Display for CallFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} ({})", self.file_path, self.line, self.function_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StackSample {
    pub timestamp_ms: i64,
    pub invocation_id: String,
    pub entry_point: String,
    /// Root-first: `frames[0]` is the handler frame, the last frame is where
    /// the sample landed.
    pub frames: Vec<CallFrame>,
}

impl StackSample {
    pub fn leaf(&self) -> &CallFrame {
        self.frames.last().expect("validated samples have frames")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImportTiming {
    pub module: String,
    /// Time spent in this module's own body, excluding nested imports.
    pub self_time_us: u64,
    pub invocation_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InvocationEvent {
    pub timestamp_ms: i64,
    pub entry_point: String,
    pub invocation_id: String,
    pub e2e_time_us: u64,
    pub cold_start: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentMeta {
    pub app_id: String,
    pub agent_version: String,
    pub sampling_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileRecord {
    Sample(StackSample),
    Import(ImportTiming),
    Invocation(InvocationEvent),
    Meta(AgentMeta),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "k")]
enum WireRecord {
    #[serde(rename = "sample")]
    Sample {
        ts: i64,
        inv: String,
        ep: String,
        fr: Vec<(String, String, u32)>,
    },
    #[serde(rename = "imp")]
    Import {
        inv: String,
        #[serde(rename = "mod")]
        module: String,
        self_us: u64,
    },
    #[serde(rename = "invk")]
    Invocation {
        ts: i64,
        inv: String,
        ep: String,
        e2e_us: u64,
        cold: bool,
    },
    #[serde(rename = "meta")]
    Meta { app: String, agent_ver: String, hz: f64 },
}

/// Name of the handler function an entry point refers to
/// (`"handler.lambda_handler"` and `"handler:lambda_handler"` both give
/// `"lambda_handler"`).
pub fn handler_function_name(entry_point: &str) -> &str {
    entry_point.rsplit(['.', ':']).next().unwrap_or(entry_point)
}

/// Checks `[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*`.
pub fn is_dotted_name(name: &str) -> bool {
    !name.is_empty()
        && name.split('.').all(|part| {
            let mut chars = part.chars();
            matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
}

impl ProfileRecord {
    fn from_wire(wire: WireRecord) -> Result<Self> {
        let record = match wire {
            WireRecord::Sample { ts, inv, ep, fr } => ProfileRecord::Sample(StackSample {
                timestamp_ms: ts,
                invocation_id: inv,
                entry_point: ep,
                frames: fr.into_iter().map(|(f, p, l)| CallFrame::new(f, p, l)).collect(),
            }),
            WireRecord::Import { inv, module, self_us } => ProfileRecord::Import(ImportTiming {
                module,
                self_time_us: self_us,
                invocation_id: inv,
            }),
            WireRecord::Invocation {
                ts,
                inv,
                ep,
                e2e_us,
                cold,
            } => ProfileRecord::Invocation(InvocationEvent {
                timestamp_ms: ts,
                entry_point: ep,
                invocation_id: inv,
                e2e_time_us: e2e_us,
                cold_start: cold,
            }),
            WireRecord::Meta { app, agent_ver, hz } => ProfileRecord::Meta(AgentMeta {
                app_id: app,
                agent_version: agent_ver,
                sampling_hz: hz,
            }),
        };
        record.validate()?;
        Ok(record)
    }

    fn to_wire(&self) -> WireRecord {
        match self {
            ProfileRecord::Sample(s) => WireRecord::Sample {
                ts: s.timestamp_ms,
                inv: s.invocation_id.clone(),
                ep: s.entry_point.clone(),
                fr: s
                    .frames
                    .iter()
                    .map(|f| (f.function_name.clone(), f.file_path.clone(), f.line))
                    .collect(),
            },
            ProfileRecord::Import(i) => WireRecord::Import {
                inv: i.invocation_id.clone(),
                module: i.module.clone(),
                self_us: i.self_time_us,
            },
            ProfileRecord::Invocation(e) => WireRecord::Invocation {
                ts: e.timestamp_ms,
                inv: e.invocation_id.clone(),
                ep: e.entry_point.clone(),
                e2e_us: e.e2e_time_us,
                cold: e.cold_start,
            },
            ProfileRecord::Meta(m) => WireRecord::Meta {
                app: m.app_id.clone(),
                agent_ver: m.agent_version.clone(),
                hz: m.sampling_hz,
            },
        }
    }

    /// Checks the per-record invariants that the wire types cannot express.
    pub fn validate(&self) -> Result<()> {
        match self {
            ProfileRecord::Sample(s) => {
                if s.invocation_id.is_empty() || s.entry_point.is_empty() {
                    return Err(ProfileError::malformed("sample without invocation or entry point"));
                }
                let Some(root) = s.frames.first() else {
                    return Err(ProfileError::malformed("sample with an empty stack"));
                };
                for frame in &s.frames {
                    frame.validate()?;
                }
                let handler = handler_function_name(&s.entry_point);
                if root.function_name != handler {
                    return Err(ProfileError::malformed(format!(
                        "root frame `{}` is not the entry point handler `{handler}`",
                        root.function_name
                    )));
                }
            }
            ProfileRecord::Import(i) => {
                if !is_dotted_name(&i.module) {
                    return Err(ProfileError::malformed(format!(
                        "`{}` is not a dotted module name",
                        i.module
                    )));
                }
                if i.invocation_id.is_empty() {
                    return Err(ProfileError::malformed("import timing without invocation id"));
                }
            }
            ProfileRecord::Invocation(e) => {
                if e.invocation_id.is_empty() || e.entry_point.is_empty() {
                    return Err(ProfileError::malformed(
                        "invocation without invocation id or entry point",
                    ));
                }
            }
            ProfileRecord::Meta(m) => {
                if m.app_id.is_empty() {
                    return Err(ProfileError::malformed("meta record without app id"));
                }
                if !m.sampling_hz.is_finite() || m.sampling_hz <= 0.0 {
                    return Err(ProfileError::malformed("sampling frequency must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Canonical single-line serialization. Byte identity of this string is
    /// what duplicate detection uses.
    pub fn to_wire_line(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("wire records always serialize")
    }

    pub fn invocation_id(&self) -> Option<&str> {
        match self {
            ProfileRecord::Sample(s) => Some(&s.invocation_id),
            ProfileRecord::Import(i) => Some(&i.invocation_id),
            ProfileRecord::Invocation(e) => Some(&e.invocation_id),
            ProfileRecord::Meta(_) => None,
        }
    }
}

/// Parses one wire-format line. Unknown record kinds are rejected, unknown
/// extra fields are ignored.
pub fn parse_record(line: &str) -> Result<ProfileRecord> {
    let wire: WireRecord = serde_json::from_str(line.trim()).map_err(|e| ProfileError::malformed(e.to_string()))?;
    ProfileRecord::from_wire(wire)
}

/// Parses a whole batch, failing on the first malformed line. Blank lines
/// are skipped; line numbers in errors are 1-based.
pub fn parse_batch(text: &str, exec: Execution) -> Result<Vec<ProfileRecord>> {
    let lines: Vec<(usize, &str)> = numbered_lines(text);
    let parsed = exec.map(&lines, |(n, line)| parse_record(line).map_err(|e| e.at_line(*n)));
    parsed.into_iter().collect()
}

/// A line rejected by [`parse_batch_lenient`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Parses a batch keeping every valid line and reporting each bad one.
pub fn parse_batch_lenient(text: &str, exec: Execution) -> (Vec<ProfileRecord>, Vec<RejectedLine>) {
    let lines = numbered_lines(text);
    let parsed = exec.map(&lines, |(n, line)| (*n, parse_record(line)));
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for (line, result) in parsed {
        match result {
            Ok(r) => ok.push(r),
            Err(e) => rejected.push(RejectedLine {
                line,
                reason: e.to_string(),
            }),
        }
    }
    (ok, rejected)
}

fn numbered_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect()
}

pub fn read_batch_file(path: &Path, exec: Execution) -> Result<Vec<ProfileRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_batch(&text, exec)
}

/// Serializes records as a batch (one canonical line per record).
pub fn write_batch(records: &[ProfileRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_wire_line());
        out.push('\n');
    }
    out
}

/// Merged, deduplicated and sorted profile data for one application.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileStore {
    pub app_id: String,
    pub meta: Vec<AgentMeta>,
    pub samples: Vec<StackSample>,
    pub imports: Vec<ImportTiming>,
    pub invocations: Vec<InvocationEvent>,
}

/// Findings of [`validate_and_merge`] that do not prevent building a store.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Invocation ids referenced by samples or imports with no invocation record.
    pub orphan_invocations: Vec<String>,
    pub duplicates_removed: usize,
    /// Cold invocations whose end-to-end time is below their summed import time.
    pub cold_budget_violations: Vec<String>,
    /// Distinct app ids seen in meta records when more than one was present.
    pub conflicting_app_ids: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.orphan_invocations.is_empty()
            && self.cold_budget_violations.is_empty()
            && self.conflicting_app_ids.is_empty()
    }
}

impl ProfileStore {
    pub fn total_records(&self) -> usize {
        self.meta.len() + self.samples.len() + self.imports.len() + self.invocations.len()
    }

    /// All records in store order: meta, invocations, imports, samples.
    pub fn records(&self) -> Vec<ProfileRecord> {
        let mut out = Vec::with_capacity(self.total_records());
        out.extend(self.meta.iter().cloned().map(ProfileRecord::Meta));
        out.extend(self.invocations.iter().cloned().map(ProfileRecord::Invocation));
        out.extend(self.imports.iter().cloned().map(ProfileRecord::Import));
        out.extend(self.samples.iter().cloned().map(ProfileRecord::Sample));
        out
    }

    pub fn to_batch_text(&self) -> String {
        write_batch(&self.records())
    }
}

/// Merges agent batches into a deterministic store.
///
/// Records are deduplicated by canonical byte identity. Samples and
/// invocations are ordered by `(timestamp, invocation id, canonical bytes)`,
/// imports by `(invocation id, module, canonical bytes)`, so any permutation
/// of the input batches produces the same store.
pub fn validate_and_merge(batches: &[Vec<ProfileRecord>], exec: Execution) -> Result<(ProfileStore, ValidationReport)> {
    if batches.is_empty() {
        return Err(ProfileError::EmptyInput);
    }
    let flat: Vec<&ProfileRecord> = batches.iter().flatten().collect();
    let keyed: Vec<(String, &ProfileRecord)> = exec.map(&flat, |r| (r.to_wire_line(), *r));

    let mut seen = HashSet::with_capacity(keyed.len());
    let mut report = ValidationReport::default();
    let mut meta = Vec::new();
    let mut samples = Vec::new();
    let mut imports = Vec::new();
    let mut invocations = Vec::new();
    for (key, record) in keyed {
        if !seen.insert(key.clone()) {
            report.duplicates_removed += 1;
            continue;
        }
        match record {
            ProfileRecord::Meta(m) => meta.push((key, m.clone())),
            ProfileRecord::Sample(s) => samples.push((key, s.clone())),
            ProfileRecord::Import(i) => imports.push((key, i.clone())),
            ProfileRecord::Invocation(e) => invocations.push((key, e.clone())),
        }
    }

    meta.sort_by(|a, b| a.0.cmp(&b.0));
    samples.sort_by(|a, b| {
        (a.1.timestamp_ms, &a.1.invocation_id, &a.0).cmp(&(b.1.timestamp_ms, &b.1.invocation_id, &b.0))
    });
    invocations.sort_by(|a, b| {
        (a.1.timestamp_ms, &a.1.invocation_id, &a.0).cmp(&(b.1.timestamp_ms, &b.1.invocation_id, &b.0))
    });
    imports.sort_by(|a, b| (&a.1.invocation_id, &a.1.module, &a.0).cmp(&(&b.1.invocation_id, &b.1.module, &b.0)));

    let meta: Vec<AgentMeta> = meta.into_iter().map(|(_, m)| m).collect();
    let samples: Vec<StackSample> = samples.into_iter().map(|(_, s)| s).collect();
    let imports: Vec<ImportTiming> = imports.into_iter().map(|(_, i)| i).collect();
    let invocations: Vec<InvocationEvent> = invocations.into_iter().map(|(_, e)| e).collect();

    let known: HashSet<&str> = invocations.iter().map(|e| e.invocation_id.as_str()).collect();
    let orphans: BTreeSet<String> = samples
        .iter()
        .map(|s| s.invocation_id.as_str())
        .chain(imports.iter().map(|i| i.invocation_id.as_str()))
        .filter(|id| !known.contains(id))
        .map(str::to_owned)
        .collect();
    report.orphan_invocations = orphans.into_iter().collect();

    let mut import_totals: BTreeMap<&str, u64> = BTreeMap::new();
    for i in &imports {
        *import_totals.entry(i.invocation_id.as_str()).or_default() += i.self_time_us;
    }
    report.cold_budget_violations = invocations
        .iter()
        .filter(|e| e.cold_start)
        .filter(|e| import_totals.get(e.invocation_id.as_str()).copied().unwrap_or(0) > e.e2e_time_us)
        .map(|e| e.invocation_id.clone())
        .collect();

    let apps: BTreeSet<&str> = meta.iter().map(|m| m.app_id.as_str()).collect();
    if apps.len() > 1 {
        report.conflicting_app_ids = apps.iter().map(|s| s.to_string()).collect();
    }
    let app_id = apps
        .iter()
        .next()
        .map(|s| s.to_string())
        .unwrap_or_else(|| "unknown".into());

    Ok((
        ProfileStore {
            app_id,
            meta,
            samples,
            imports,
            invocations,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const IGRAPH_SAMPLE: &str = r#"{"k":"sample","ts":1710000000000,"inv":"i1","ep":"handler","fr":[["handler","app/handler.py",2],["<module>","site-packages/igraph/__init__.py",104]]}"#;

    fn inv(id: &str, ts: i64) -> ProfileRecord {
        ProfileRecord::Invocation(InvocationEvent {
            timestamp_ms: ts,
            entry_point: "handler".into(),
            invocation_id: id.into(),
            e2e_time_us: 1_000,
            cold_start: false,
        })
    }

    fn sample(id: &str, ts: i64, leaf: &str) -> ProfileRecord {
        ProfileRecord::Sample(StackSample {
            timestamp_ms: ts,
            invocation_id: id.into(),
            entry_point: "handler".into(),
            frames: vec![
                CallFrame::new("handler", "app/handler.py", 3),
                CallFrame::new(leaf, "site-packages/lib/core.py", 10),
            ],
        })
    }

    #[test]
    fn parses_root_first_sample() {
        let ProfileRecord::Sample(s) = parse_record(IGRAPH_SAMPLE).unwrap() else {
            panic!("expected a sample");
        };
        assert_eq!(s.frames.len(), 2);
        assert_eq!(s.frames[0], CallFrame::new("handler", "app/handler.py", 2));
        assert_eq!(s.leaf().file_path, "site-packages/igraph/__init__.py");
        assert_eq!(s.leaf().line, 104);
    }

    #[test]
    fn parses_zero_cost_import() {
        let r = parse_record(r#"{"k":"imp","inv":"i1","mod":"nltk.sem","self_us":0}"#).unwrap();
        assert_eq!(
            r,
            ProfileRecord::Import(ImportTiming {
                module: "nltk.sem".into(),
                self_time_us: 0,
                invocation_id: "i1".into()
            })
        );
    }

    #[test]
    fn rejects_bad_records() {
        for line in [
            r#"{"k":"sample","ts":1,"inv":"i1","ep":"h","fr":[]}"#,
            r#"{"k":"imp","inv":"i1","mod":"x","self_us":-5}"#,
            r#"{"k":"imp","inv":"i1","mod":"1bad","self_us":5}"#,
            r#"{"k":"imp","inv":"i1","self_us":5}"#,
            r#"{"k":"bogus","inv":"i1"}"#,
            r#"{"k":"sample","ts":1,"inv":"i1","ep":"h","fr":[["h","a.py",0]]}"#,
            r#"{"k":"sample","ts":1,"inv":"i1","ep":"h","fr":[["other","a.py",1]]}"#,
            r#"{"k":"invk","ts":1.5,"inv":"i1","ep":"h","e2e_us":3,"cold":true}"#,
            "not json",
        ] {
            assert!(
                matches!(parse_record(line), Err(ProfileError::MalformedRecord { .. })),
                "accepted {line}"
            );
        }
    }

    #[test]
    fn ignores_unknown_fields() {
        let r =
            parse_record(r#"{"k":"invk","ts":5,"inv":"i9","ep":"h","e2e_us":3,"cold":true,"region":"eu"}"#).unwrap();
        assert!(matches!(r, ProfileRecord::Invocation(ref e) if e.cold_start));
    }

    #[test]
    fn entry_point_handler_name() {
        assert_eq!(handler_function_name("handler"), "handler");
        assert_eq!(handler_function_name("app.handler.lambda_handler"), "lambda_handler");
        assert_eq!(handler_function_name("handler:main"), "main");
    }

    #[test]
    fn canonical_line_is_stable() {
        let r = parse_record(IGRAPH_SAMPLE).unwrap();
        assert_eq!(r.to_wire_line(), IGRAPH_SAMPLE);
    }

    #[test]
    fn strict_batch_reports_line_number() {
        let text = format!("{IGRAPH_SAMPLE}\n\n{{\"k\":\"nope\"}}\n");
        match parse_batch(&text, Execution::Sequential) {
            Err(ProfileError::MalformedRecord { line: Some(3), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let (ok, bad) = parse_batch_lenient(&text, Execution::Parallel);
        assert_eq!(ok.len(), 1);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].line, 3);
    }

    #[test]
    fn merge_deduplicates_identical_records() {
        let a = vec![inv("i1", 1), sample("i1", 2, "f")];
        let b = vec![sample("i1", 2, "f"), sample("i1", 3, "g")];
        let (store, report) = validate_and_merge(&[a, b], Execution::Sequential).unwrap();
        assert_eq!(store.samples.len(), 2);
        assert_eq!(report.duplicates_removed, 1);
        assert!(report.is_clean());
    }

    #[test]
    fn merge_sorts_by_timestamp() {
        let a = vec![sample("i1", 30, "c"), inv("i1", 0)];
        let b = vec![sample("i1", 10, "a"), sample("i1", 20, "b")];
        let (store, _) = validate_and_merge(&[a, b], Execution::Parallel).unwrap();
        let ts: Vec<i64> = store.samples.iter().map(|s| s.timestamp_ms).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn merge_reports_orphans_without_dropping_them() {
        let full = [inv("i1", 1), inv("i2", 2), sample("i1", 3, "f"), sample("i2", 4, "g")];
        // Fixture: the same batch with the i2 invocation record deleted.
        let pruned: Vec<ProfileRecord> = full
            .iter()
            .filter(|r| !matches!(r, ProfileRecord::Invocation(e) if e.invocation_id == "i2"))
            .cloned()
            .collect();
        let (store, report) = validate_and_merge(&[pruned], Execution::Sequential).unwrap();
        assert_eq!(store.samples.len(), 2);
        assert_eq!(report.orphan_invocations, vec!["i2".to_string()]);
    }

    #[test]
    fn merge_rejects_empty_input() {
        assert!(matches!(
            validate_and_merge(&[], Execution::Sequential),
            Err(ProfileError::EmptyInput)
        ));
    }

    #[test]
    fn cold_budget_violation_is_reported() {
        let records = vec![
            ProfileRecord::Invocation(InvocationEvent {
                timestamp_ms: 0,
                entry_point: "handler".into(),
                invocation_id: "c1".into(),
                e2e_time_us: 10,
                cold_start: true,
            }),
            ProfileRecord::Import(ImportTiming {
                module: "heavy".into(),
                self_time_us: 50,
                invocation_id: "c1".into(),
            }),
        ];
        let (_, report) = validate_and_merge(&[records], Execution::Sequential).unwrap();
        assert_eq!(report.cold_budget_violations, vec!["c1".to_string()]);
    }

    #[test]
    fn store_text_round_trips() {
        let batch = vec![
            ProfileRecord::Meta(AgentMeta {
                app_id: "demo".into(),
                agent_version: "0.1".into(),
                sampling_hz: 99.5,
            }),
            inv("i1", 1),
            sample("i1", 5, "f"),
        ];
        let (store, _) = validate_and_merge(&[batch], Execution::Sequential).unwrap();
        assert_eq!(store.app_id, "demo");
        let reparsed = parse_batch(&store.to_batch_text(), Execution::Sequential).unwrap();
        let (again, _) = validate_and_merge(&[reparsed], Execution::Sequential).unwrap();
        assert_eq!(again, store);
    }
}
