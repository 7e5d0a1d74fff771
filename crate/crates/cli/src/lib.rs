//! The `pgo` command-line pipeline: ingest profile batches, analyze them,
//! rewrite the application's imports, and watch workload traces for shifts.

pub mod cli;
pub mod collector;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use pgo_core::detect::render_report;
use pgo_core::Execution;

use crate::cli::{Cli, Command, ReportFormat};
use crate::config::{CollectorMode, Config};
use crate::error::{CliError, Result, EXIT_OK, EXIT_USAGE};
use crate::pipeline::{AutoSpec, OptimizeOptions, SimOverrides};

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("pgo: {e}");
            if let CliError::Rewrite(pgo_core::rewrite::RewriteError::VerificationFailure(msgs)) = &e {
                for m in msgs {
                    eprintln!("  {m}");
                }
            }
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let out = cli.out;
    let mut stdout = std::io::stdout().lock();
    let mut say = |s: String| {
        let _ = writeln!(stdout, "{s}");
    };

    match cli.command {
        Command::Ingest { paths } => {
            let paths = if paths.is_empty() {
                if cfg.collector.mode != CollectorMode::Dir {
                    return Err(CliError::Usage(
                        "no batch paths given and the collector is not in dir mode".into(),
                    ));
                }
                vec![PathBuf::from(&cfg.collector.location)]
            } else {
                paths
            };
            let r = pipeline::ingest(&paths, &cfg, &out, exec)?;
            let v = &r.validation;
            say(format!(
                "ingested {} records from {} batches ({} duplicates removed)",
                r.records, r.batches, v.duplicates_removed
            ));
            if !v.is_clean() {
                eprintln!(
                    "warning: {} orphan invocation(s), {} cold-start budget violation(s), conflicting app ids {:?}",
                    v.orphan_invocations.len(),
                    v.cold_budget_violations.len(),
                    v.conflicting_app_ids
                );
            }
            say(r.store_path.display().to_string());
        }
        Command::Analyze { store } => {
            let r = pipeline::analyze(&store, &cfg, &out, exec)?;
            let verdict = if r.report.gate.passes {
                "above threshold"
            } else {
                "below threshold"
            };
            say(format!(
                "initialization {verdict}; {} finding(s)",
                r.report.findings.len()
            ));
            for w in &r.report.warnings {
                eprintln!("warning: {w}");
            }
            say(r.report_json.display().to_string());
        }
        Command::Report { report, format } => {
            let report = pipeline::load_report(&report)?;
            let fmt = match format {
                ReportFormat::Md => "md",
                ReportFormat::Json => "json",
            };
            let text = render_report(&report, fmt)?;
            say(text.trim_end().to_string());
        }
        Command::Optimize(a) => {
            let opts = OptimizeOptions {
                dry_run: a.dry_run,
                save_plan: a.save_plan,
                apply_plan: a.apply_plan,
            };
            let r = pipeline::optimize(&a.report, &a.source, &cfg, &opts, exec)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            for c in &r.changes {
                if a.dry_run {
                    say(c.diff.trim_end().to_string());
                } else {
                    say(format!(
                        "patched {} (removed lines {:?}, {} insertion(s))",
                        c.path,
                        c.summary.removed,
                        c.summary.inserted.len()
                    ));
                }
            }
            if r.changes.is_empty() {
                say("no changes".into());
            }
        }
        Command::Watch(a) => {
            let auto = if a.auto {
                Some(AutoSpec {
                    store: a.store.clone().expect("clap requires --store"),
                    source_root: a.src.clone().expect("clap requires --source"),
                })
            } else {
                None
            };
            let r = pipeline::watch(&a.source, a.app.as_deref(), &cfg, &out, auto.as_ref(), exec, |t| {
                println!(
                    "trigger window={} end_ms={} delta={:.6}",
                    t.window_index, t.window_end_ms, t.total_delta
                );
            })?;
            eprintln!(
                "watched {} rows over {} windows: {} trigger(s), {} malformed row(s), {} late event(s) dropped",
                r.rows,
                r.windows,
                r.fired.len(),
                r.rejected,
                r.late_dropped
            );
        }
        Command::ServeCollector { bind } => {
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .map_err(|e| CliError::Usage(format!("cannot bind {bind}: {e}")))?;
                let addr = listener.local_addr().map_err(|e| CliError::Data(e.to_string()))?;
                eprintln!(
                    "collector listening on http://{addr}, storing batches in {}",
                    out.display()
                );
                collector::serve(listener, out.clone(), async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
                .map_err(|e| CliError::Data(e.to_string()))
            })?;
        }
        Command::Simulate(a) => {
            let overrides = SimOverrides {
                app_id: a.app_id,
                entry_points: a.entry_points,
                windows: a.windows,
                window_ms: a.window_ms,
                per_window: a.per_window,
                skew: a.skew,
                shifts: a.shifts,
                shift_top_k: a.shift_top_k,
                seed: a.seed,
            };
            let spec = pipeline::simulation_spec(a.spec.as_deref(), &overrides)?;
            let csv = pipeline::simulate_csv(&spec, exec);
            match a.output {
                Some(p) => manifest::write_atomic(&p, csv.as_bytes())?,
                None => say(csv.trim_end().to_string()),
            }
        }
    }
    Ok(())
}
