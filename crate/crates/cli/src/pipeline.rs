//! Command implementations. Each returns a typed outcome and leaves
//! printing to the caller.

use std::fs::{self, OpenOptions};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use pgo_core::adaptive::windows_to_csv;
use pgo_core::adaptive::{read_trace, StreamController, TriggerDecision};
use pgo_core::detect::{analyze_store, render_markdown, Report};
use pgo_core::profile::{
    read_batch_file, validate_and_merge, ProfileRecord, ProfileStore, ValidationReport, BATCH_EXTENSION,
};
use pgo_core::rewrite::{
    apply, rewrite_sources, scan_imports, verify, PatchSummary, PlanOptions, RewriteError, RewritePlan, SourceFile,
};
use pgo_core::simulate::{simulate, SimSpec};
use pgo_core::Execution;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::manifest::{now_ms, write_atomic, Artifact, RunManifest};

pub const STORE_FILE: &str = "store.pgoprof.jsonl";
pub const TRIGGERS_FILE: &str = "triggers.jsonl";

fn safe_component(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() || cleaned.chars().all(|c| c == '.') {
        "unknown-app".into()
    } else {
        cleaned
    }
}

fn is_batch_file(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(&format!(".{BATCH_EXTENSION}")))
}

/// Expands directories into the batch files they contain, sorted by path.
pub fn collect_batch_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = WalkDir::new(p)
                .into_iter()
                .filter_map(|e| e.ok())
                .filter(|e| e.file_type().is_file() && is_batch_file(e.path()))
                .map(|e| e.into_path())
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(CliError::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
    }
    if files.is_empty() {
        return Err(pgo_core::profile::ProfileError::EmptyInput.into());
    }
    Ok(files)
}

fn read_batch(path: &Path, exec: Execution) -> Result<Vec<ProfileRecord>> {
    read_batch_file(path, exec).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub run_dir: PathBuf,
    pub store_path: PathBuf,
    pub batches: usize,
    pub records: usize,
    pub validation: ValidationReport,
    pub manifest: RunManifest,
}

pub fn ingest(paths: &[PathBuf], cfg: &Config, out: &Path, exec: Execution) -> Result<IngestOutcome> {
    let started = now_ms();
    let files = collect_batch_files(paths)?;
    let inputs = files.iter().map(|f| Artifact::of_file(f)).collect::<Result<Vec<_>>>()?;
    let batches = files.iter().map(|f| read_batch(f, exec)).collect::<Result<Vec<_>>>()?;
    let (store, validation) = validate_and_merge(&batches, exec)?;

    let mut manifest = RunManifest::new("ingest", &cfg.digest(), inputs, started);
    let run_dir = out
        .join("store")
        .join(safe_component(&store.app_id))
        .join(&manifest.run_id);
    let store_path = run_dir.join(STORE_FILE);
    write_atomic(&store_path, store.to_batch_text().as_bytes())?;
    let validation_path = run_dir.join("validation.json");
    write_atomic(&validation_path, pretty(&validation).as_bytes())?;
    manifest.record(&store_path)?;
    manifest.record(&validation_path)?;
    manifest.write(&run_dir)?;
    Ok(IngestOutcome {
        run_dir,
        store_path,
        batches: files.len(),
        records: store.total_records(),
        validation,
        manifest,
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Accepts a store file or a run directory holding one.
pub fn resolve_store(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(STORE_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_store(path: &Path, exec: Execution) -> Result<ProfileStore> {
    let records = read_batch(&resolve_store(path), exec)?;
    Ok(validate_and_merge(&[records], exec)?.0)
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub run_dir: PathBuf,
    pub report: Report,
    pub report_json: PathBuf,
    pub report_md: PathBuf,
    pub manifest: RunManifest,
}

pub fn analyze(store_path: &Path, cfg: &Config, out: &Path, exec: Execution) -> Result<AnalyzeOutcome> {
    let started = now_ms();
    let store_file = resolve_store(store_path);
    let input = Artifact::of_file(&store_file)?;
    let store = load_store(&store_file, exec)?;
    let report = analyze_store(&store, &cfg.mapping(), &cfg.detector(), exec)?;

    let mut manifest = RunManifest::new("analyze", &cfg.digest(), vec![input], started);
    let run_dir = out
        .join("reports")
        .join(safe_component(&store.app_id))
        .join(&manifest.run_id);
    let report_json = run_dir.join("report.json");
    let report_md = run_dir.join("report.md");
    write_atomic(&report_json, report.to_json().as_bytes())?;
    write_atomic(&report_md, render_markdown(&report).as_bytes())?;
    manifest.record(&report_json)?;
    manifest.record(&report_md)?;
    manifest.write(&run_dir)?;
    Ok(AnalyzeOutcome {
        run_dir,
        report,
        report_json,
        report_md,
        manifest,
    })
}

pub fn load_report(path: &Path) -> Result<Report> {
    let path = if path.is_dir() {
        path.join("report.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(Report::from_json(&text)?)
}

#[derive(Debug, Clone, Default)]
pub struct OptimizeOptions {
    pub dry_run: bool,
    /// Write the computed plans here.
    pub save_plan: Option<PathBuf>,
    /// Apply previously saved plans instead of planning afresh.
    pub apply_plan: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct FileChange {
    /// Relative to the source root, `/`-separated.
    pub path: String,
    pub summary: PatchSummary,
    pub diff: String,
}

#[derive(Debug, Clone, Default)]
pub struct OptimizeOutcome {
    pub targets: Vec<String>,
    pub changes: Vec<FileChange>,
    pub warnings: Vec<String>,
    pub written: bool,
}

const SKIPPED_DIRS: &[&str] = &["__pycache__", "site-packages", "dist-packages", "node_modules", "venv"];

/// Python sources under `root`, skipping hidden, cache and vendored trees.
pub fn python_sources(root: &Path) -> Result<Vec<SourceFile>> {
    let mut files = Vec::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() == 0
            || !(e.file_type().is_dir() && {
                let name = e.file_name().to_string_lossy();
                name.starts_with('.') || SKIPPED_DIRS.contains(&name.as_ref())
            })
    });
    for entry in walker {
        let entry = entry.map_err(|e| CliError::Data(e.to_string()))?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().and_then(|x| x.to_str()) != Some("py") {
            continue;
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let rel = path.strip_prefix(root).unwrap_or(path);
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        files.push(SourceFile { path: rel, text });
    }
    Ok(files)
}

pub fn unified_diff(path: &str, before: &str, after: &str) -> String {
    similar::TextDiff::from_lines(before, after)
        .unified_diff()
        .context_radius(2)
        .header(&format!("a/{path}"), &format!("b/{path}"))
        .to_string()
}

fn under(name: &str, prefix: &str) -> bool {
    name == prefix || name.strip_prefix(prefix).is_some_and(|rest| rest.starts_with('.'))
}

pub fn optimize(
    report_path: &Path,
    source_root: &Path,
    cfg: &Config,
    opts: &OptimizeOptions,
    exec: Execution,
) -> Result<OptimizeOutcome> {
    let mut outcome = OptimizeOutcome::default();
    let files = python_sources(source_root)?;
    let plans: Vec<(RewritePlan, String, String)> = match &opts.apply_plan {
        Some(plan_path) => {
            let text = fs::read_to_string(plan_path).map_err(|e| CliError::io(plan_path, e))?;
            let plans: Vec<RewritePlan> =
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", plan_path.display())))?;
            let mut out = Vec::new();
            for p in plans {
                let path = source_root.join(&p.file);
                let before = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let after = apply(&before, &p)?;
                verify(&before, &after).map_err(|e| prefix_verification(&p.file, e))?;
                out.push((p, before, after));
            }
            out
        }
        None => {
            let report = load_report(report_path)?;
            if !report.gate.passes {
                outcome
                    .warnings
                    .push("report is below the initialization threshold; nothing to optimize".into());
                return Ok(outcome);
            }
            outcome.targets = cfg.deferral_targets(&report);
            if outcome.targets.is_empty() {
                outcome
                    .warnings
                    .push("report has no findings; nothing to optimize".into());
                return Ok(outcome);
            }
            for t in &outcome.targets {
                let imported = files.iter().any(|f| {
                    scan_imports(&f.path, &f.text).is_ok_and(|imps| {
                        imps.iter()
                            .any(|i| under(&i.target_module, t) || i.bound_names.iter().any(|b| under(&b.refers_to, t)))
                    })
                });
                if !imported {
                    outcome
                        .warnings
                        .push(format!("`{t}` is not imported at module level by any source file"));
                }
            }
            let options = PlanOptions {
                denylist: cfg.denylist.clone(),
            };
            let results = rewrite_sources(&files, &outcome.targets, &options, exec);
            let mut failures = Vec::new();
            let mut out = Vec::new();
            for (f, r) in files.iter().zip(results) {
                match r {
                    Ok(rw) => {
                        if !rw.plan.is_empty() {
                            out.push((rw.plan, f.text.clone(), rw.output));
                        } else if !rw.plan.skipped.is_empty() {
                            for s in &rw.plan.skipped {
                                outcome
                                    .warnings
                                    .push(format!("{}: skipped ({}) {}", f.path, s.reason, s.detail));
                            }
                        }
                    }
                    Err(RewriteError::VerificationFailure(msgs)) => {
                        failures.extend(msgs.into_iter().map(|m| format!("{}: {m}", f.path)));
                    }
                    Err(e @ RewriteError::Parse { .. }) => {
                        outcome.warnings.push(format!("not rewritten: {e}"));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if !failures.is_empty() {
                return Err(RewriteError::VerificationFailure(failures).into());
            }
            out
        }
    };

    for (plan, before, after) in &plans {
        for s in &plan.skipped {
            outcome
                .warnings
                .push(format!("{}: skipped ({}) {}", plan.file, s.reason, s.detail));
        }
        outcome.changes.push(FileChange {
            path: plan.file.clone(),
            summary: plan.summary(),
            diff: unified_diff(&plan.file, before, after),
        });
    }
    if let Some(path) = &opts.save_plan {
        let saved: Vec<&RewritePlan> = plans.iter().map(|(p, _, _)| p).collect();
        write_atomic(path, pretty(&saved).as_bytes())?;
    }
    if !opts.dry_run {
        for (plan, _, after) in &plans {
            write_atomic(&source_root.join(&plan.file), after.as_bytes())?;
        }
        outcome.written = !plans.is_empty();
    }
    Ok(outcome)
}

fn prefix_verification(file: &str, e: RewriteError) -> CliError {
    match e {
        RewriteError::VerificationFailure(m) => {
            RewriteError::VerificationFailure(m.into_iter().map(|s| format!("{file}: {s}")).collect()).into()
        }
        other => other.into(),
    }
}

/// One line of `triggers.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub app_id: String,
    pub window_index: usize,
    pub window_end_ms: i64,
    pub total_delta: f64,
    pub epsilon: f64,
    /// Entry points with the largest probability change, largest first.
    pub top_changes: Vec<(String, f64)>,
}

impl TriggerRecord {
    fn from_decision(app_id: &str, d: &TriggerDecision, epsilon: f64) -> Self {
        let mut top: Vec<(String, f64)> = d.per_entry_delta.iter().map(|(k, v)| (k.clone(), *v)).collect();
        top.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        top.truncate(5);
        TriggerRecord {
            app_id: app_id.to_string(),
            window_index: d.window_index,
            window_end_ms: d.window_end_ms,
            total_delta: d.total_delta,
            epsilon,
            top_changes: top,
        }
    }
}

/// What `watch --auto` re-runs after a trigger.
#[derive(Debug, Clone)]
pub struct AutoSpec {
    pub store: PathBuf,
    pub source_root: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct WatchOutcome {
    pub triggers_path: PathBuf,
    pub fired: Vec<TriggerRecord>,
    pub rows: usize,
    pub rejected: usize,
    pub late_dropped: u64,
    pub windows: usize,
    pub auto_runs: usize,
}

/// Replays a trace through the streaming controller. `source` is a CSV
/// trace (`-` for stdin), a batch file, or a directory of batch files whose
/// invocation events are used.
pub fn watch(
    source: &Path,
    app_filter: Option<&str>,
    cfg: &Config,
    out: &Path,
    auto: Option<&AutoSpec>,
    exec: Execution,
    mut on_trigger: impl FnMut(&TriggerRecord),
) -> Result<WatchOutcome> {
    let adaptive = cfg.adaptive();
    let mut controller = StreamController::new(adaptive)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let triggers_path = out.join(TRIGGERS_FILE);
    let mut triggers = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&triggers_path)
        .map_err(|e| CliError::io(&triggers_path, e))?;
    let mut outcome = WatchOutcome {
        triggers_path: triggers_path.clone(),
        ..WatchOutcome::default()
    };
    let mut app_id = app_filter.unwrap_or_default().to_string();
    let mut pending: Vec<TriggerDecision> = Vec::new();
    let mut io_error = None;

    let mut handle = |decisions: Vec<TriggerDecision>, app_id: &str, outcome: &mut WatchOutcome| -> Result<()> {
        for d in decisions.into_iter().filter(|d| d.fired) {
            let rec = TriggerRecord::from_decision(app_id, &d, adaptive.epsilon);
            let mut line = serde_json::to_string(&rec).expect("serializable");
            line.push('\n');
            triggers
                .write_all(line.as_bytes())
                .and_then(|_| triggers.flush())
                .map_err(|e| CliError::io(&triggers_path, e))?;
            on_trigger(&rec);
            outcome.fired.push(rec);
            if let Some(a) = auto {
                let analyzed = analyze(&a.store, cfg, out, exec)?;
                optimize(
                    &analyzed.report_json,
                    &a.source_root,
                    cfg,
                    &OptimizeOptions::default(),
                    exec,
                )?;
                outcome.auto_runs += 1;
            }
        }
        Ok(())
    };

    let is_csv = source == Path::new("-") || !(source.is_dir() || is_batch_file(source));
    if is_csv {
        let input: Box<dyn Read> = if source == Path::new("-") {
            Box::new(std::io::stdin().lock())
        } else {
            Box::new(fs::File::open(source).map_err(|e| CliError::io(source, e))?)
        };
        read_trace(BufReader::new(input), |row| match row {
            Ok(r) => {
                if app_filter.is_some_and(|a| a != r.app_id) {
                    return;
                }
                if app_id.is_empty() {
                    app_id = r.app_id.clone();
                }
                outcome.rows += 1;
                pending.extend(controller.observe(&r.entry_point, r.timestamp_ms, r.count, None));
                if !pending.is_empty() && io_error.is_none() {
                    if let Err(e) = handle(std::mem::take(&mut pending), &app_id, &mut outcome) {
                        io_error = Some(e);
                    }
                }
            }
            Err(_) => outcome.rejected += 1,
        })?;
    } else {
        let files = collect_batch_files(&[source.to_path_buf()])?;
        let batches = files.iter().map(|f| read_batch(f, exec)).collect::<Result<Vec<_>>>()?;
        let (store, _) = validate_and_merge(&batches, exec)?;
        if app_id.is_empty() {
            app_id = store.app_id.clone();
        }
        for e in &store.invocations {
            outcome.rows += 1;
            pending.extend(controller.observe_event(e));
            if !pending.is_empty() && io_error.is_none() {
                if let Err(err) = handle(std::mem::take(&mut pending), &app_id, &mut outcome) {
                    io_error = Some(err);
                }
            }
        }
    }
    if let Some(e) = io_error {
        return Err(e);
    }
    let rest = controller.finish();
    handle(rest, &app_id, &mut outcome)?;
    outcome.late_dropped = controller.late_dropped();
    outcome.windows = controller.windows_closed();
    Ok(outcome)
}

/// Overrides applied on top of a simulation spec.
#[derive(Debug, Clone, Default)]
pub struct SimOverrides {
    pub app_id: Option<String>,
    pub entry_points: Option<usize>,
    pub windows: Option<usize>,
    pub window_ms: Option<i64>,
    pub per_window: Option<u64>,
    pub skew: Option<f64>,
    pub shifts: Option<Vec<usize>>,
    pub shift_top_k: Option<usize>,
    pub seed: Option<u64>,
}

pub fn simulation_spec(spec_file: Option<&Path>, o: &SimOverrides) -> Result<SimSpec> {
    let mut spec = match spec_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => SimSpec::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => {$( if let Some(v) = o.$f.clone() { spec.$f = v; } )*};
    }
    set!(
        app_id,
        entry_points,
        windows,
        window_ms,
        per_window,
        skew,
        shifts,
        shift_top_k,
        seed
    );
    if spec.entry_points == 0 || spec.windows == 0 || spec.window_ms <= 0 || spec.skew < 0.0 {
        return Err(CliError::Usage(
            "simulation needs entry_points > 0, windows > 0, window_ms > 0 and skew >= 0".into(),
        ));
    }
    Ok(spec)
}

pub fn simulate_csv(spec: &SimSpec, exec: Execution) -> String {
    windows_to_csv(&spec.app_id, &simulate(spec, exec))
}
