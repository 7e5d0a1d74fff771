#![allow(dead_code)]

//! Runner for the rewriter fixture corpus. Each case directory holds an
//! `app.py`, the fake libraries it imports, and a `case.json` oracle.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pgo_core::rewrite::{apply, plan, verify, PlanOptions, MARKER};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
pub struct Case {
    pub flagged: Vec<String>,
    #[serde(default)]
    pub denylist: Vec<String>,
    pub calls: Vec<String>,
    pub removed_lines: Vec<usize>,
    pub scopes: Vec<String>,
    pub skips: Vec<String>,
    pub loads_at: BTreeMap<String, Option<i64>>,
}

#[derive(Debug)]
pub struct Outcome {
    pub name: String,
    pub rewritable: bool,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Works from any crate in the workspace that includes this file.
pub fn corpus_dir() -> PathBuf {
    corpus_dir_from(env!("CARGO_MANIFEST_DIR"))
}

fn corpus_dir_from(manifest_dir: &str) -> PathBuf {
    let here = Path::new(manifest_dir).join("tests/fixtures/rewriter");
    if here.is_dir() {
        return here;
    }
    Path::new(manifest_dir).join("../core/tests/fixtures/rewriter")
}

pub fn case_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("case.json").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

pub fn load_case(dir: &Path) -> Case {
    serde_json::from_str(&fs::read_to_string(dir.join("case.json")).unwrap()).unwrap()
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

pub struct Run {
    pub stdout: Vec<String>,
    pub status: BTreeMap<String, Option<i64>>,
}

pub fn python() -> String {
    std::env::var("PGO_PYTHON").unwrap_or_else(|_| "python3".into())
}

pub fn run_program(root: &Path, case_json: &Path, harness: &Path) -> Result<Run, String> {
    let out = Command::new(python())
        .arg("-B")
        .arg(harness)
        .arg(root)
        .arg(case_json)
        .env("PYTHONHASHSEED", "0")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .output()
        .map_err(|e| format!("cannot start {}: {e}", python()))?;
    if !out.status.success() {
        return Err(format!(
            "program exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let mut stdout = Vec::new();
    let mut status = None;
    for line in text.lines() {
        match line.strip_prefix("__STATUS__ ") {
            Some(s) => status = Some(serde_json::from_str(s).map_err(|e| e.to_string())?),
            None => stdout.push(line.to_string()),
        }
    }
    Ok(Run {
        stdout,
        status: status.ok_or("no status line")?,
    })
}

/// Every original line survives, verbatim or behind the marker, in order.
pub fn preserves_lines(original: &str, rewritten: &str) -> bool {
    let mut out = rewritten.lines();
    original.lines().all(|want| {
        out.by_ref()
            .any(|got| got == want || got.strip_prefix(MARKER) == Some(want))
    })
}

pub fn run_case(dir: &Path) -> Outcome {
    let name = dir.file_name().unwrap().to_string_lossy().into_owned();
    let case = load_case(dir);
    let rewritable = !case.removed_lines.is_empty();
    let mut failures = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            failures.push(msg);
        }
    };

    let source = fs::read_to_string(dir.join("app.py")).unwrap();
    let opts = PlanOptions {
        denylist: case.denylist.clone(),
    };
    let p = match plan("app.py", &source, &case.flagged, &opts) {
        Ok(p) => p,
        Err(e) => {
            return Outcome {
                name,
                rewritable,
                failures: vec![format!("plan failed: {e}")],
            }
        }
    };
    let summary = p.summary();
    check(
        summary.removed == case.removed_lines,
        format!("removed lines {:?}, expected {:?}", summary.removed, case.removed_lines),
    );
    let scopes: Vec<&str> = p.insertions.iter().map(|i| i.scope.as_str()).collect();
    check(
        scopes == case.scopes,
        format!("insertion scopes {scopes:?}, expected {:?}", case.scopes),
    );
    let skips: Vec<String> = p.skipped.iter().map(|s| s.reason.to_string()).collect();
    check(
        skips == case.skips,
        format!("skips {skips:?}, expected {:?}", case.skips),
    );

    let output = match apply(&source, &p) {
        Ok(o) => o,
        Err(e) => {
            failures.push(format!("apply failed: {e}"));
            return Outcome {
                name,
                rewritable,
                failures,
            };
        }
    };
    let mut check = |ok: bool, msg: String| {
        if !ok {
            failures.push(msg);
        }
    };
    check(
        output.lines().count() >= source.lines().count(),
        "output is shorter than input".into(),
    );
    check(
        preserves_lines(&source, &output),
        "an original line was altered or dropped".into(),
    );
    if rewritable {
        if let Err(e) = verify(&source, &output) {
            check(false, format!("verify: {e}"));
        }
    } else {
        check(output == source, "skip-only case changed the source".into());
    }
    match plan("app.py", &output, &case.flagged, &opts) {
        Ok(again) => check(
            again.is_empty(),
            format!("re-planning is not empty: {:?}", again.removals),
        ),
        Err(e) => check(false, format!("rewritten source does not parse: {e}")),
    }

    let tmp = tempfile::tempdir().unwrap();
    let orig_root = tmp.path().join("original");
    let new_root = tmp.path().join("rewritten");
    copy_tree(dir, &orig_root);
    copy_tree(dir, &new_root);
    fs::write(new_root.join("app.py"), &output).unwrap();
    let harness = corpus_dir().join("harness.py");
    let case_json = dir.join("case.json");
    match (
        run_program(&orig_root, &case_json, &harness),
        run_program(&new_root, &case_json, &harness),
    ) {
        (Ok(before), Ok(after)) => {
            check(
                before.stdout == after.stdout,
                format!(
                    "stdout differs:\n  original  {:?}\n  rewritten {:?}",
                    before.stdout, after.stdout
                ),
            );
            check(
                after.status == case.loads_at,
                format!("load trace {:?}, expected {:?}", after.status, case.loads_at),
            );
            if rewritable {
                for r in &p.removals {
                    for (m, at) in &before.status {
                        let ours = m == &r.target_module || m.starts_with(&format!("{}.", r.target_module));
                        if ours && *at != Some(-1) {
                            check(false, format!("original program does not load {m} eagerly"));
                        }
                    }
                }
            }
        }
        (Err(e), _) | (_, Err(e)) => check(false, e),
    }

    Outcome {
        name,
        rewritable,
        failures,
    }
}
