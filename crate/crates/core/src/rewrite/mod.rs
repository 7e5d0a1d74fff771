//! Deferred-import rewriting for Python sources.
//!
//! [`plan`] finds module-level imports of flagged modules and works out which
//! functions read the names they bind. [`apply`] comments the imports out
//! with a `# [pgo-deferred]` marker and re-imports at the top of each of
//! those functions. Edits are line-based so every other byte of the file is
//! kept. [`verify`] checks a rewrite against its original.

pub mod analysis;
pub mod lines;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rustpython_parser::ast::{self, Ranged, Stmt};
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exec::Execution;
use analysis::{Anchor, ModuleAnalysis, UseSite};
use lines::{newline_of, split_keep_ends, LineIndex};

pub const MARKER: &str = "# [pgo-deferred] ";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewriteError {
    #[error("{file}:{line}:{column}: syntax error: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file} changed since it was planned (plan digest {expected}, current {actual})")]
    StaleSource {
        file: String,
        expected: String,
        actual: String,
    },
    #[error("verification failed: {}", .0.join("; "))]
    VerificationFailure(Vec<String>),
}

pub type Result<T> = std::result::Result<T, RewriteError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    PlainImport,
    FromImport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundName {
    pub binding: String,
    /// Module or module attribute the binding refers to.
    pub refers_to: String,
}

/// A module-level import. Plain imports with several aliases yield one
/// entry per alias, all sharing the statement's line span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalImport {
    pub source_file: String,
    /// First and last line of the statement, 1-based and inclusive.
    pub line_span: (usize, usize),
    pub statement_kind: StatementKind,
    pub target_module: String,
    pub bound_names: Vec<BoundName>,
    /// `from m import *`; never rewritten.
    pub star: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    StarImport,
    TryImport,
    ConditionalImport,
    SideEffectDenylist,
    ModuleLevelUse,
    MixedStatement,
    SharedLine,
    ReboundAtModuleLevel,
    GlobalDeclaration,
    UnsupportedLayout,
    /// Informational: `__import__` or `importlib.import_module` seen.
    DynamicImport,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        write!(f, "{}", s.as_ref().and_then(|v| v.as_str()).unwrap_or("unknown"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub reason: SkipReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub start_line: usize,
    pub end_line: usize,
    pub target_module: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    /// Qualified name of the receiving function.
    pub scope: String,
    /// The import goes immediately before this line of the original source.
    pub line: usize,
    pub indent: String,
    pub statement_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewritePlan {
    pub file: String,
    /// SHA-256 of the source the plan was computed from.
    pub source_digest: String,
    pub removals: Vec<Removal>,
    pub insertions: Vec<Insertion>,
    pub skipped: Vec<Skip>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertedAt {
    pub scope: String,
    /// Line of the inserted import in the rewritten file.
    pub line: usize,
}

/// Per-file summary of a rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSummary {
    pub file: String,
    pub removed: Vec<usize>,
    pub inserted: Vec<InsertedAt>,
    pub skipped: Vec<Skip>,
}

impl RewritePlan {
    /// No removals and no insertions. Informational skips may remain.
    pub fn is_empty(&self) -> bool {
        self.removals.is_empty() && self.insertions.is_empty()
    }

    pub fn summary(&self) -> PatchSummary {
        let removed = self.removals.iter().flat_map(|r| r.start_line..=r.end_line).collect();
        let inserted = self
            .insertions
            .iter()
            .enumerate()
            .map(|(k, ins)| InsertedAt {
                scope: ins.scope.clone(),
                line: ins.line + k,
            })
            .collect();
        PatchSummary {
            file: self.file.clone(),
            removed,
            inserted,
            skipped: self.skipped.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Modules whose import has side effects that must happen at load time.
    pub denylist: Vec<String>,
}

pub fn digest(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}

fn parse(file: &str, source: &str) -> Result<Vec<Stmt>> {
    ast::Suite::parse(source, file).map_err(|e| {
        let index = LineIndex::new(source);
        let offset = e.offset.to_usize().min(source.len());
        let line = index.line_of(offset);
        let column = offset - index.line_start(line) + 1;
        RewriteError::Parse {
            file: file.to_string(),
            line,
            column,
            message: e.error.to_string(),
        }
    })
}

fn under(name: &str, prefix: &str) -> bool {
    name == prefix || (name.starts_with(prefix) && name.as_bytes().get(prefix.len()) == Some(&b'.'))
}

fn under_any(name: &str, set: &[String]) -> bool {
    set.iter().any(|p| under(name, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Guard {
    Try,
    Conditional,
}

/// One module-level import statement with its context.
#[derive(Debug, Clone)]
struct ImportStatement {
    imports: Vec<GlobalImport>,
    guard: Option<Guard>,
    span: (usize, usize),
    shares_line: bool,
    relative: bool,
    future: bool,
    /// Equivalent single-line statement text.
    text: String,
}

impl ImportStatement {
    fn star(&self) -> bool {
        self.imports.iter().any(|i| i.star)
    }

    fn bindings(&self) -> BTreeSet<String> {
        self.imports
            .iter()
            .flat_map(|i| i.bound_names.iter().map(|b| b.binding.clone()))
            .collect()
    }

    fn is_flagged(import: &GlobalImport, flagged: &[String]) -> bool {
        under_any(&import.target_module, flagged) || import.bound_names.iter().any(|b| under_any(&b.refers_to, flagged))
    }
}

fn alias_text(a: &ast::Alias) -> String {
    match &a.asname {
        Some(n) => format!("{} as {n}", a.name),
        None => a.name.to_string(),
    }
}

struct Scanner<'a> {
    file: &'a str,
    index: &'a LineIndex,
    out: Vec<ImportStatement>,
}

impl<'a> Scanner<'a> {
    fn span_of(&self, s: &Stmt) -> (usize, usize) {
        let start = self.index.line_of(s.start().to_usize());
        let end = self
            .index
            .line_of(s.end().to_usize().saturating_sub(1).max(s.start().to_usize()));
        (start, end)
    }

    fn shares_line(&self, s: &Stmt) -> bool {
        let src = self.index.source();
        let (start, end) = (s.start().to_usize(), s.end().to_usize());
        let line_start = self.index.line_start(self.index.line_of(start));
        let before = &src[line_start..start];
        let rest = &src[end..];
        let after = rest.split('\n').next().unwrap_or("");
        let after = after.trim_end_matches('\r').trim();
        !before.trim().is_empty() || !(after.is_empty() || after.starts_with('#'))
    }

    fn walk(&mut self, body: &[Stmt], guard: Option<Guard>) {
        for s in body {
            match s {
                Stmt::Import(i) => {
                    let span = self.span_of(s);
                    let imports = i
                        .names
                        .iter()
                        .map(|a| {
                            let target = a.name.to_string();
                            let binding = match &a.asname {
                                Some(n) => n.to_string(),
                                None => target.split('.').next().unwrap_or_default().to_string(),
                            };
                            GlobalImport {
                                source_file: self.file.to_string(),
                                line_span: span,
                                statement_kind: StatementKind::PlainImport,
                                target_module: target.clone(),
                                bound_names: vec![BoundName {
                                    binding,
                                    refers_to: target,
                                }],
                                star: false,
                            }
                        })
                        .collect();
                    let text = format!(
                        "import {}",
                        i.names.iter().map(alias_text).collect::<Vec<_>>().join(", ")
                    );
                    self.out.push(ImportStatement {
                        imports,
                        guard,
                        span,
                        shares_line: self.shares_line(s),
                        relative: false,
                        future: false,
                        text,
                    });
                }
                Stmt::ImportFrom(i) => {
                    let span = self.span_of(s);
                    let level = i.level.as_ref().map(|l| l.to_usize()).unwrap_or(0);
                    let module = i.module.as_ref().map(|m| m.to_string()).unwrap_or_default();
                    let target = format!("{}{}", ".".repeat(level), module);
                    let star = i.names.iter().any(|a| a.name.as_str() == "*");
                    let bound_names = i
                        .names
                        .iter()
                        .filter(|a| a.name.as_str() != "*")
                        .map(|a| BoundName {
                            binding: a.asname.as_ref().unwrap_or(&a.name).to_string(),
                            refers_to: if module.is_empty() {
                                format!("{target}{}", a.name)
                            } else {
                                format!("{target}.{}", a.name)
                            },
                        })
                        .collect();
                    let text = format!(
                        "from {target} import {}",
                        i.names.iter().map(alias_text).collect::<Vec<_>>().join(", ")
                    );
                    self.out.push(ImportStatement {
                        imports: vec![GlobalImport {
                            source_file: self.file.to_string(),
                            line_span: span,
                            statement_kind: StatementKind::FromImport,
                            target_module: target,
                            bound_names,
                            star,
                        }],
                        guard,
                        span,
                        shares_line: self.shares_line(s),
                        relative: level > 0,
                        future: module == "__future__",
                        text,
                    });
                }
                Stmt::Try(t) => {
                    self.try_blocks(&t.body, &t.handlers, &t.orelse, &t.finalbody);
                }
                Stmt::TryStar(t) => {
                    self.try_blocks(&t.body, &t.handlers, &t.orelse, &t.finalbody);
                }
                Stmt::If(i) => {
                    let g = guard.or(Some(Guard::Conditional));
                    self.walk(&i.body, g);
                    self.walk(&i.orelse, g);
                }
                Stmt::With(w) => self.walk(&w.body, guard.or(Some(Guard::Conditional))),
                Stmt::AsyncWith(w) => self.walk(&w.body, guard.or(Some(Guard::Conditional))),
                Stmt::For(f) => {
                    let g = guard.or(Some(Guard::Conditional));
                    self.walk(&f.body, g);
                    self.walk(&f.orelse, g);
                }
                Stmt::AsyncFor(f) => {
                    let g = guard.or(Some(Guard::Conditional));
                    self.walk(&f.body, g);
                    self.walk(&f.orelse, g);
                }
                Stmt::While(w) => {
                    let g = guard.or(Some(Guard::Conditional));
                    self.walk(&w.body, g);
                    self.walk(&w.orelse, g);
                }
                Stmt::Match(m) => {
                    for case in &m.cases {
                        self.walk(&case.body, guard.or(Some(Guard::Conditional)));
                    }
                }
                _ => {}
            }
        }
    }

    fn try_blocks(&mut self, body: &[Stmt], handlers: &[ast::ExceptHandler], orelse: &[Stmt], finalbody: &[Stmt]) {
        let g = Some(Guard::Try);
        self.walk(body, g);
        for h in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = h;
            self.walk(&h.body, g);
        }
        self.walk(orelse, g);
        self.walk(finalbody, g);
    }
}

fn scan_statements(file: &str, body: &[Stmt], index: &LineIndex) -> Vec<ImportStatement> {
    let mut scanner = Scanner {
        file,
        index,
        out: Vec::new(),
    };
    scanner.walk(body, None);
    scanner.out
}

/// Module-level import statements that execute unconditionally. Imports in
/// functions, under conditionals, or inside `try` blocks are not returned.
pub fn scan_imports(file: &str, source: &str) -> Result<Vec<GlobalImport>> {
    let body = parse(file, source)?;
    let index = LineIndex::new(source);
    Ok(scan_statements(file, &body, &index)
        .into_iter()
        .filter(|s| s.guard.is_none())
        .flat_map(|s| s.imports)
        .collect())
}

/// Plans the deferral of every module-level import of a `flagged` module.
/// Imports that cannot be deferred safely are reported in `skipped`.
pub fn plan(file: &str, source: &str, flagged: &[String], options: &PlanOptions) -> Result<RewritePlan> {
    let body = parse(file, source)?;
    let index = LineIndex::new(source);
    let analysis = ModuleAnalysis::analyze(&body, &index);
    let statements = scan_statements(file, &body, &index);

    let mut plan = RewritePlan {
        file: file.to_string(),
        source_digest: digest(source),
        removals: Vec::new(),
        insertions: Vec::new(),
        skipped: Vec::new(),
    };
    if flagged.is_empty() {
        return Ok(plan);
    }

    let mut pending: Vec<(usize, usize, Insertion)> = Vec::new();
    for (order, st) in statements.iter().enumerate() {
        if st.relative || st.future {
            continue;
        }
        let flags: Vec<bool> = st
            .imports
            .iter()
            .map(|i| ImportStatement::is_flagged(i, flagged))
            .collect();
        if !flags.iter().any(|&f| f) {
            continue;
        }
        let detail = format!("line {}: {}", st.span.0, st.text);
        let skip = |reason: SkipReason, detail: String| Skip { reason, detail };

        if st.star() {
            plan.skipped.push(skip(SkipReason::StarImport, detail));
            continue;
        }
        match st.guard {
            Some(Guard::Try) => {
                plan.skipped.push(skip(SkipReason::TryImport, detail));
                continue;
            }
            Some(Guard::Conditional) => {
                plan.skipped.push(skip(SkipReason::ConditionalImport, detail));
                continue;
            }
            None => {}
        }
        let denied = st.imports.iter().any(|i| {
            under_any(&i.target_module, &options.denylist)
                || i.bound_names.iter().any(|b| under_any(&b.refers_to, &options.denylist))
        });
        if denied {
            plan.skipped.push(skip(SkipReason::SideEffectDenylist, detail));
            continue;
        }
        if !flags.iter().all(|&f| f) {
            plan.skipped.push(skip(
                SkipReason::MixedStatement,
                format!("{detail} (only some names are flagged)"),
            ));
            continue;
        }
        if st.shares_line {
            plan.skipped.push(skip(SkipReason::SharedLine, detail));
            continue;
        }

        let bindings = st.bindings();
        let mut problem = None;
        for b in &bindings {
            if let Some(line) = analysis.module_rebinding_line(b) {
                problem = Some(skip(
                    SkipReason::ReboundAtModuleLevel,
                    format!("{detail} (`{b}` reassigned at line {line})"),
                ));
            } else if let Some(s) = analysis.global_declarations(b).first() {
                problem = Some(skip(
                    SkipReason::GlobalDeclaration,
                    format!("{detail} (`global {b}` in {})", s.qualname),
                ));
            } else if let Some(line) = analysis.first_module_level_use(b) {
                problem = Some(skip(
                    SkipReason::ModuleLevelUse,
                    format!("{detail} (`{b}` used at module level, line {line})"),
                ));
            }
            if problem.is_some() {
                break;
            }
        }
        if let Some(p) = problem {
            plan.skipped.push(p);
            continue;
        }

        let sites: BTreeSet<usize> = bindings
            .iter()
            .flat_map(|b| analysis.global_use_sites(b))
            .filter_map(|s| match s {
                UseSite::Function(id) => Some(id),
                UseSite::ModuleLevel => None,
            })
            .collect();
        let mut inserts = Vec::new();
        for id in sites {
            let scope = &analysis.scopes[id];
            match scope.anchor.as_ref() {
                Some(Anchor::Before { line, indent }) => inserts.push(Insertion {
                    scope: scope.qualname.clone(),
                    line: *line,
                    indent: indent.clone(),
                    statement_text: st.text.clone(),
                }),
                Some(Anchor::Unsupported(why)) => {
                    problem = Some(skip(
                        SkipReason::UnsupportedLayout,
                        format!("{detail} (cannot insert into {}: {why})", scope.qualname),
                    ));
                    break;
                }
                None => {}
            }
        }
        if let Some(p) = problem {
            plan.skipped.push(p);
            continue;
        }
        plan.removals.push(Removal {
            start_line: st.span.0,
            end_line: st.span.1,
            target_module: st.imports[0].target_module.clone(),
        });
        pending.extend(inserts.into_iter().map(|i| (i.line, order, i)));
    }

    for d in &analysis.dynamic_imports {
        let relevant = match &d.module {
            Some(m) => under_any(m, flagged),
            None => true,
        };
        if relevant {
            plan.skipped.push(Skip {
                reason: SkipReason::DynamicImport,
                detail: format!(
                    "line {}: dynamic import of {}",
                    d.line,
                    d.module
                        .as_deref()
                        .map(|m| format!("`{m}`"))
                        .unwrap_or_else(|| "a computed name".into())
                ),
            });
        }
    }

    pending.sort_by_key(|(line, order, _)| (*line, *order));
    plan.insertions = pending.into_iter().map(|(_, _, i)| i).collect();
    Ok(plan)
}

/// Applies a plan to the exact source it was computed from.
pub fn apply(source: &str, plan: &RewritePlan) -> Result<String> {
    let actual = digest(source);
    if actual != plan.source_digest {
        return Err(RewriteError::StaleSource {
            file: plan.file.clone(),
            expected: plan.source_digest.clone(),
            actual,
        });
    }
    if plan.is_empty() {
        return Ok(source.to_string());
    }
    let nl = newline_of(source);
    let removed: HashSet<usize> = plan.removals.iter().flat_map(|r| r.start_line..=r.end_line).collect();
    let mut inserts: BTreeMap<usize, Vec<&Insertion>> = BTreeMap::new();
    for ins in &plan.insertions {
        inserts.entry(ins.line).or_default().push(ins);
    }
    let lines = split_keep_ends(source);
    let mut out = String::with_capacity(source.len() + 64 * plan.insertions.len());
    let emit = |out: &mut String, at: usize| {
        for ins in inserts.get(&at).into_iter().flatten() {
            out.push_str(&ins.indent);
            out.push_str(&ins.statement_text);
            out.push_str(nl);
        }
    };
    for (i, line) in lines.iter().enumerate() {
        let n = i + 1;
        emit(&mut out, n);
        if removed.contains(&n) {
            out.push_str(MARKER);
        }
        out.push_str(line);
    }
    let tail = lines.len() + 1;
    if inserts.contains_key(&tail) {
        if !out.ends_with('\n') {
            out.push_str(nl);
        }
        emit(&mut out, tail);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub rewritten_parses: bool,
    pub bindings_preserved: bool,
    /// Module-level names now bound only inside functions.
    pub deferred_bindings: Vec<String>,
    /// Functions that re-import a deferred binding.
    pub reimporting_scopes: Vec<String>,
}

/// Checks a rewritten file against its original: the rewrite parses, the
/// module namespace differs only by marker-commented imports, and every
/// scope reading a deferred name re-imports it.
pub fn verify(original: &str, rewritten: &str) -> Result<VerificationReport> {
    let orig_body = parse("<original>", original)?;
    let rew_body = match parse("<rewritten>", rewritten) {
        Ok(b) => b,
        Err(e) => {
            return Err(RewriteError::VerificationFailure(vec![format!(
                "rewritten source does not parse: {e}"
            )]))
        }
    };
    let orig_index = LineIndex::new(original);
    let rew_index = LineIndex::new(rewritten);
    let orig = ModuleAnalysis::analyze(&orig_body, &orig_index);
    let rew = ModuleAnalysis::analyze(&rew_body, &rew_index);

    let marked: HashSet<&str> = rewritten
        .lines()
        .filter_map(|l| l.strip_prefix(MARKER))
        .map(|l| l.trim_end_matches('\r'))
        .collect();
    let mut allowed = BTreeSet::new();
    for st in scan_statements("<original>", &orig_body, &orig_index) {
        if st.guard.is_some() {
            continue;
        }
        let all_marked = (st.span.0..=st.span.1).all(|n| marked.contains(orig_index.line_text(n, original)));
        if all_marked {
            allowed.extend(st.bindings());
        }
    }

    let before = orig.module_bindings();
    let after = rew.module_bindings();
    let missing: Vec<String> = before.difference(&after).cloned().collect();
    let extra: Vec<String> = after.difference(&before).cloned().collect();
    let mut failures = Vec::new();
    let unexplained: Vec<&String> = missing.iter().filter(|m| !allowed.contains(*m)).collect();
    if !extra.is_empty() || !unexplained.is_empty() {
        failures.push(format!(
            "bindings diverged: missing {:?}, unexpected {:?}",
            unexplained, extra
        ));
    }

    let mut reimporting = BTreeSet::new();
    for name in &missing {
        for site in rew.global_use_sites(name) {
            let scope = match site {
                UseSite::ModuleLevel => "<module>".to_string(),
                UseSite::Function(id) => rew.scopes[id].qualname.clone(),
            };
            failures.push(format!(
                "scope `{scope}` reads deferred name `{name}` without re-importing it"
            ));
        }
        for (id, s) in rew.scopes.iter().enumerate() {
            if s.kind == analysis::ScopeKind::Function
                && rew
                    .bindings
                    .iter()
                    .any(|b| b.scope == id && &b.name == name && b.kind == analysis::BindKind::Import)
            {
                reimporting.insert(s.qualname.clone());
            }
        }
    }

    if !failures.is_empty() {
        return Err(RewriteError::VerificationFailure(failures));
    }
    Ok(VerificationReport {
        rewritten_parses: true,
        bindings_preserved: true,
        deferred_bindings: missing,
        reimporting_scopes: reimporting.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileRewrite {
    pub plan: RewritePlan,
    pub output: String,
    /// Present when the plan had edits.
    pub verification: Option<VerificationReport>,
}

/// Plans, applies and verifies each file independently.
pub fn rewrite_sources(
    files: &[SourceFile],
    flagged: &[String],
    options: &PlanOptions,
    exec: Execution,
) -> Vec<Result<FileRewrite>> {
    exec.map(files, |f| {
        let plan = plan(&f.path, &f.text, flagged, options)?;
        let output = apply(&f.text, &plan)?;
        let verification = if plan.is_empty() {
            None
        } else {
            Some(verify(&f.text, &output)?)
        };
        Ok(FileRewrite {
            plan,
            output,
            verification,
        })
    })
}
