//! Scope analysis over a parsed Python module.
//!
//! One traversal records scopes, bindings and name loads as events; name
//! resolution runs afterwards, once every scope's local set is known. This
//! mirrors Python's compile-time rule that a name assigned anywhere in a
//! function body is local to the whole body.

use std::collections::{BTreeSet, HashMap, HashSet};

use rustpython_parser::ast::{self, Expr, Pattern, Ranged, Stmt};

use super::lines::LineIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    Module,
    Function,
    Class,
    Lambda,
    Comprehension,
}

/// Where a deferred import goes inside a function body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anchor {
    /// Insert before this 1-based line, using `indent`.
    Before { line: usize, indent: String },
    /// The body cannot take a line-based insertion (e.g. `def f(): return x`).
    Unsupported(String),
}

#[derive(Debug, Clone)]
pub struct Scope {
    pub kind: ScopeKind,
    pub qualname: String,
    pub parent: Option<usize>,
    pub locals: HashSet<String>,
    pub globals: HashSet<String>,
    pub nonlocals: HashSet<String>,
    pub anchor: Option<Anchor>,
    pub def_line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindKind {
    Import,
    Other,
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub scope: usize,
    pub name: String,
    pub line: usize,
    pub kind: BindKind,
}

#[derive(Debug, Clone)]
pub struct Load {
    pub scope: usize,
    pub name: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct DynamicImport {
    pub line: usize,
    /// Constant module-name argument, when there is one.
    pub module: Option<String>,
}

/// Where a global-resolving reference executes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UseSite {
    ModuleLevel,
    Function(usize),
}

#[derive(Debug, Default)]
pub struct ModuleAnalysis {
    pub scopes: Vec<Scope>,
    pub bindings: Vec<Binding>,
    pub loads: Vec<Load>,
    pub dynamic_imports: Vec<DynamicImport>,
}

impl ModuleAnalysis {
    pub fn analyze(body: &[Stmt], index: &LineIndex) -> ModuleAnalysis {
        let mut w = Walker {
            out: ModuleAnalysis::default(),
            index,
        };
        w.out.scopes.push(Scope {
            kind: ScopeKind::Module,
            qualname: "<module>".into(),
            parent: None,
            locals: HashSet::new(),
            globals: HashSet::new(),
            nonlocals: HashSet::new(),
            anchor: None,
            def_line: 0,
        });
        w.stmts(body, 0);
        let mut out = w.out;
        for b in &out.bindings {
            out.scopes[b.scope].locals.insert(b.name.clone());
        }
        out
    }

    /// True when a load of `name` in `scope` reaches the module namespace.
    pub fn resolves_global(&self, scope: usize, name: &str) -> bool {
        let s = &self.scopes[scope];
        if s.kind == ScopeKind::Module || s.globals.contains(name) {
            return true;
        }
        if s.nonlocals.contains(name) || s.locals.contains(name) {
            return false;
        }
        let mut cur = s.parent;
        while let Some(id) = cur {
            let p = &self.scopes[id];
            match p.kind {
                ScopeKind::Module => return true,
                ScopeKind::Class => {}
                _ => {
                    if p.globals.contains(name) {
                        return true;
                    }
                    if p.locals.contains(name) || p.nonlocals.contains(name) {
                        return false;
                    }
                }
            }
            cur = p.parent;
        }
        true
    }

    /// Innermost enclosing `def` for a scope, or module level.
    pub fn use_site(&self, scope: usize) -> UseSite {
        let mut cur = Some(scope);
        while let Some(id) = cur {
            let s = &self.scopes[id];
            match s.kind {
                ScopeKind::Function => return UseSite::Function(id),
                ScopeKind::Module => return UseSite::ModuleLevel,
                _ => cur = s.parent,
            }
        }
        UseSite::ModuleLevel
    }

    /// Every place where `name` is read from the module namespace.
    pub fn global_use_sites(&self, name: &str) -> BTreeSet<UseSite> {
        self.loads
            .iter()
            .filter(|l| l.name == name && self.resolves_global(l.scope, name))
            .map(|l| self.use_site(l.scope))
            .collect()
    }

    pub fn first_module_level_use(&self, name: &str) -> Option<usize> {
        self.loads
            .iter()
            .filter(|l| {
                l.name == name && self.resolves_global(l.scope, name) && self.use_site(l.scope) == UseSite::ModuleLevel
            })
            .map(|l| l.line)
            .min()
    }

    /// Module-level bindings of `name` that do not come from an import.
    pub fn module_rebinding_line(&self, name: &str) -> Option<usize> {
        self.bindings
            .iter()
            .filter(|b| b.scope == 0 && b.name == name && b.kind == BindKind::Other)
            .map(|b| b.line)
            .min()
    }

    /// Functions declaring `global name`.
    pub fn global_declarations(&self, name: &str) -> Vec<&Scope> {
        self.scopes
            .iter()
            .filter(|s| s.kind != ScopeKind::Module && s.globals.contains(name))
            .collect()
    }

    pub fn module_bindings(&self) -> BTreeSet<String> {
        self.scopes[0].locals.iter().cloned().collect()
    }
}

struct Walker<'a> {
    out: ModuleAnalysis,
    index: &'a LineIndex,
}

fn is_docstring(stmt: &Stmt) -> bool {
    matches!(stmt, Stmt::Expr(e) if matches!(
        e.value.as_ref(),
        Expr::Constant(c) if matches!(c.value, ast::Constant::Str(_))
    ))
}

impl<'a> Walker<'a> {
    fn line_of<T: Ranged>(&self, node: &T) -> usize {
        self.index.line_of(node.start().to_usize())
    }

    fn push_scope(&mut self, kind: ScopeKind, qualname: String, parent: usize, def_line: usize) -> usize {
        self.out.scopes.push(Scope {
            kind,
            qualname,
            parent: Some(parent),
            locals: HashSet::new(),
            globals: HashSet::new(),
            nonlocals: HashSet::new(),
            anchor: None,
            def_line,
        });
        self.out.scopes.len() - 1
    }

    fn child_qualname(&self, parent: usize, name: &str) -> String {
        let p = &self.out.scopes[parent];
        match p.kind {
            ScopeKind::Module => name.to_string(),
            ScopeKind::Function | ScopeKind::Lambda => format!("{}.<locals>.{name}", p.qualname),
            _ => format!("{}.{name}", p.qualname),
        }
    }

    fn bind(&mut self, scope: usize, name: &str, line: usize, kind: BindKind) {
        self.out.bindings.push(Binding {
            scope,
            name: name.to_string(),
            line,
            kind,
        });
    }

    fn load(&mut self, scope: usize, name: &str, line: usize) {
        self.out.loads.push(Load {
            scope,
            name: name.to_string(),
            line,
        });
    }

    /// Scope that receives walrus targets: the nearest non-comprehension scope.
    fn walrus_scope(&self, mut scope: usize) -> usize {
        while self.out.scopes[scope].kind == ScopeKind::Comprehension {
            scope = self.out.scopes[scope].parent.unwrap_or(0);
        }
        scope
    }

    fn anchor_for(&self, body: &[Stmt], def_line: usize) -> Anchor {
        let (target, after) = match body {
            [doc] if is_docstring(doc) => (doc, true),
            [doc, next, ..] if is_docstring(doc) => (next, false),
            [first, ..] => (first, false),
            [] => return Anchor::Unsupported("empty body".into()),
        };
        let start = target.start().to_usize();
        let line = self.index.line_of(start);
        if line == def_line {
            return Anchor::Unsupported(format!("body shares line {line} with its `def`"));
        }
        let line_start = self.index.line_start(line);
        let prefix = &self.index.source()[line_start..start];
        if !prefix.chars().all(|c| c == ' ' || c == '\t') {
            return Anchor::Unsupported(format!("line {line} holds more than one statement"));
        }
        if after {
            let end_line = self.index.line_of(target.end().to_usize());
            Anchor::Before {
                line: end_line + 1,
                indent: prefix.to_string(),
            }
        } else {
            Anchor::Before {
                line,
                indent: prefix.to_string(),
            }
        }
    }

    fn stmts(&mut self, body: &[Stmt], scope: usize) {
        for s in body {
            self.stmt(s, scope);
        }
    }

    fn arguments(&mut self, args: &ast::Arguments, outer: usize, inner: usize) {
        let all = args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs);
        for a in all {
            if let Some(d) = &a.default {
                self.expr(d, outer);
            }
            if let Some(ann) = &a.def.annotation {
                self.expr(ann, outer);
            }
            let line = self.line_of(&a.def);
            self.bind(inner, a.def.arg.as_str(), line, BindKind::Other);
        }
        for a in [&args.vararg, &args.kwarg].into_iter().flatten() {
            if let Some(ann) = &a.annotation {
                self.expr(ann, outer);
            }
            let line = self.line_of(a.as_ref());
            self.bind(inner, a.arg.as_str(), line, BindKind::Other);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn function(
        &mut self,
        name: &str,
        args: &ast::Arguments,
        body: &[Stmt],
        decorators: &[Expr],
        returns: Option<&Expr>,
        line: usize,
        scope: usize,
    ) {
        for d in decorators {
            self.expr(d, scope);
        }
        if let Some(r) = returns {
            self.expr(r, scope);
        }
        self.bind(scope, name, line, BindKind::Other);
        let qual = self.child_qualname(scope, name);
        let def_line = line;
        let inner = self.push_scope(ScopeKind::Function, qual, scope, def_line);
        self.arguments(args, scope, inner);
        let anchor = self.anchor_for(body, def_line);
        self.out.scopes[inner].anchor = Some(anchor);
        self.stmts(body, inner);
    }

    fn stmt(&mut self, s: &Stmt, scope: usize) {
        let line = self.line_of(s);
        match s {
            Stmt::FunctionDef(f) => {
                let def_line = self.def_line(&f.decorator_list, line, f.name.as_str());
                self.function(
                    &f.name,
                    &f.args,
                    &f.body,
                    &f.decorator_list,
                    f.returns.as_deref(),
                    def_line,
                    scope,
                )
            }
            Stmt::AsyncFunctionDef(f) => {
                let def_line = self.def_line(&f.decorator_list, line, f.name.as_str());
                self.function(
                    &f.name,
                    &f.args,
                    &f.body,
                    &f.decorator_list,
                    f.returns.as_deref(),
                    def_line,
                    scope,
                )
            }
            Stmt::ClassDef(c) => {
                for d in &c.decorator_list {
                    self.expr(d, scope);
                }
                for b in &c.bases {
                    self.expr(b, scope);
                }
                for k in &c.keywords {
                    self.expr(&k.value, scope);
                }
                self.bind(scope, &c.name, line, BindKind::Other);
                let qual = self.child_qualname(scope, &c.name);
                let inner = self.push_scope(ScopeKind::Class, qual, scope, line);
                self.stmts(&c.body, inner);
            }
            Stmt::Return(r) => {
                if let Some(v) = &r.value {
                    self.expr(v, scope);
                }
            }
            Stmt::Delete(d) => {
                for t in &d.targets {
                    self.target(t, scope);
                }
            }
            Stmt::Assign(a) => {
                self.expr(&a.value, scope);
                for t in &a.targets {
                    self.target(t, scope);
                }
            }
            Stmt::TypeAlias(t) => {
                self.expr(&t.value, scope);
                self.target(&t.name, scope);
            }
            Stmt::AugAssign(a) => {
                self.expr(&a.value, scope);
                // `x += 1` reads x before rebinding it.
                self.expr(&a.target, scope);
                self.target(&a.target, scope);
            }
            Stmt::AnnAssign(a) => {
                self.expr(&a.annotation, scope);
                if let Some(v) = &a.value {
                    self.expr(v, scope);
                    self.target(&a.target, scope);
                } else if !matches!(a.target.as_ref(), Expr::Name(_)) {
                    self.expr(&a.target, scope);
                } else {
                    self.target(&a.target, scope);
                }
            }
            Stmt::For(f) => {
                self.expr(&f.iter, scope);
                self.target(&f.target, scope);
                self.stmts(&f.body, scope);
                self.stmts(&f.orelse, scope);
            }
            Stmt::AsyncFor(f) => {
                self.expr(&f.iter, scope);
                self.target(&f.target, scope);
                self.stmts(&f.body, scope);
                self.stmts(&f.orelse, scope);
            }
            Stmt::While(w) => {
                self.expr(&w.test, scope);
                self.stmts(&w.body, scope);
                self.stmts(&w.orelse, scope);
            }
            Stmt::If(i) => {
                self.expr(&i.test, scope);
                self.stmts(&i.body, scope);
                self.stmts(&i.orelse, scope);
            }
            Stmt::With(w) => {
                self.with_items(&w.items, scope);
                self.stmts(&w.body, scope);
            }
            Stmt::AsyncWith(w) => {
                self.with_items(&w.items, scope);
                self.stmts(&w.body, scope);
            }
            Stmt::Match(m) => {
                self.expr(&m.subject, scope);
                for case in &m.cases {
                    self.pattern(&case.pattern, scope);
                    if let Some(g) = &case.guard {
                        self.expr(g, scope);
                    }
                    self.stmts(&case.body, scope);
                }
            }
            Stmt::Raise(r) => {
                for e in [&r.exc, &r.cause].into_iter().flatten() {
                    self.expr(e, scope);
                }
            }
            Stmt::Try(t) => self.try_parts(&t.body, &t.handlers, &t.orelse, &t.finalbody, scope),
            Stmt::TryStar(t) => self.try_parts(&t.body, &t.handlers, &t.orelse, &t.finalbody, scope),
            Stmt::Assert(a) => {
                self.expr(&a.test, scope);
                if let Some(m) = &a.msg {
                    self.expr(m, scope);
                }
            }
            Stmt::Import(i) => {
                for a in &i.names {
                    let bound = match &a.asname {
                        Some(n) => n.to_string(),
                        None => a.name.split('.').next().unwrap_or_default().to_string(),
                    };
                    self.bind(scope, &bound, line, BindKind::Import);
                }
            }
            Stmt::ImportFrom(i) => {
                for a in &i.names {
                    if a.name.as_str() == "*" {
                        continue;
                    }
                    let bound = a.asname.as_ref().unwrap_or(&a.name);
                    self.bind(scope, bound, line, BindKind::Import);
                }
            }
            Stmt::Global(g) => {
                for n in &g.names {
                    self.out.scopes[scope].globals.insert(n.to_string());
                }
            }
            Stmt::Nonlocal(n) => {
                for n in &n.names {
                    self.out.scopes[scope].nonlocals.insert(n.to_string());
                }
            }
            Stmt::Expr(e) => self.expr(&e.value, scope),
            Stmt::Pass(_) | Stmt::Break(_) | Stmt::Continue(_) => {}
        }
    }

    /// Line of the `def` keyword itself (decorators come first).
    fn def_line(&self, decorators: &[Expr], stmt_line: usize, name: &str) -> usize {
        if decorators.is_empty() {
            return stmt_line;
        }
        let src = self.index.source();
        let mut line = decorators
            .iter()
            .map(|d| self.index.line_of(d.end().to_usize()))
            .max()
            .unwrap_or(stmt_line);
        while line <= self.index.line_count() {
            let text = self.index.line_text(line, src);
            let t = text.trim_start();
            if (t.starts_with("def ") || t.starts_with("async ")) && t.contains(name) {
                return line;
            }
            line += 1;
        }
        stmt_line
    }

    fn try_parts(
        &mut self,
        body: &[Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[Stmt],
        finalbody: &[Stmt],
        scope: usize,
    ) {
        self.stmts(body, scope);
        for h in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = h;
            if let Some(t) = &h.type_ {
                self.expr(t, scope);
            }
            if let Some(n) = &h.name {
                let line = self.line_of(h);
                self.bind(scope, n, line, BindKind::Other);
            }
            self.stmts(&h.body, scope);
        }
        self.stmts(orelse, scope);
        self.stmts(finalbody, scope);
    }

    fn with_items(&mut self, items: &[ast::WithItem], scope: usize) {
        for item in items {
            self.expr(&item.context_expr, scope);
            if let Some(v) = &item.optional_vars {
                self.target(v, scope);
            }
        }
    }

    fn pattern(&mut self, p: &Pattern, scope: usize) {
        let line = self.line_of(p);
        match p {
            Pattern::MatchValue(v) => self.expr(&v.value, scope),
            Pattern::MatchSingleton(_) => {}
            Pattern::MatchSequence(s) => s.patterns.iter().for_each(|p| self.pattern(p, scope)),
            Pattern::MatchMapping(m) => {
                m.keys.iter().for_each(|k| self.expr(k, scope));
                m.patterns.iter().for_each(|p| self.pattern(p, scope));
                if let Some(r) = &m.rest {
                    self.bind(scope, r, line, BindKind::Other);
                }
            }
            Pattern::MatchClass(c) => {
                self.expr(&c.cls, scope);
                c.patterns.iter().for_each(|p| self.pattern(p, scope));
                c.kwd_patterns.iter().for_each(|p| self.pattern(p, scope));
            }
            Pattern::MatchStar(s) => {
                if let Some(n) = &s.name {
                    self.bind(scope, n, line, BindKind::Other);
                }
            }
            Pattern::MatchAs(a) => {
                if let Some(p) = &a.pattern {
                    self.pattern(p, scope);
                }
                if let Some(n) = &a.name {
                    self.bind(scope, n, line, BindKind::Other);
                }
            }
            Pattern::MatchOr(o) => o.patterns.iter().for_each(|p| self.pattern(p, scope)),
        }
    }

    /// An assignment or deletion target: names bind, anything else is read.
    fn target(&mut self, t: &Expr, scope: usize) {
        match t {
            Expr::Name(n) => {
                let line = self.line_of(t);
                self.bind(scope, &n.id, line, BindKind::Other);
            }
            Expr::Tuple(tu) => tu.elts.iter().for_each(|e| self.target(e, scope)),
            Expr::List(l) => l.elts.iter().for_each(|e| self.target(e, scope)),
            Expr::Starred(s) => self.target(&s.value, scope),
            Expr::Attribute(a) => self.expr(&a.value, scope),
            Expr::Subscript(s) => {
                self.expr(&s.value, scope);
                self.expr(&s.slice, scope);
            }
            other => self.expr(other, scope),
        }
    }

    fn comprehension(&mut self, generators: &[ast::Comprehension], elts: &[&Expr], scope: usize) {
        let Some(first) = generators.first() else {
            return;
        };
        self.expr(&first.iter, scope);
        let parent_name = self.out.scopes[scope].qualname.clone();
        let def_line = self.line_of(&first.iter);
        let inner = self.push_scope(
            ScopeKind::Comprehension,
            format!("{parent_name}.<comp>"),
            scope,
            def_line,
        );
        for (i, g) in generators.iter().enumerate() {
            if i > 0 {
                self.expr(&g.iter, inner);
            }
            self.target(&g.target, inner);
            for cond in &g.ifs {
                self.expr(cond, inner);
            }
        }
        for e in elts {
            self.expr(e, inner);
        }
    }

    fn check_dynamic_import(&mut self, call: &ast::ExprCall, line: usize) {
        let is_dynamic = match call.func.as_ref() {
            Expr::Name(n) => n.id.as_str() == "__import__" || n.id.as_str() == "import_module",
            Expr::Attribute(a) => {
                a.attr.as_str() == "import_module"
                    && matches!(a.value.as_ref(), Expr::Name(n) if n.id.as_str() == "importlib")
            }
            _ => false,
        };
        if is_dynamic {
            let module = call.args.first().and_then(|a| match a {
                Expr::Constant(c) => match &c.value {
                    ast::Constant::Str(s) => Some(s.clone()),
                    _ => None,
                },
                _ => None,
            });
            self.out.dynamic_imports.push(DynamicImport { line, module });
        }
    }

    fn expr(&mut self, e: &Expr, scope: usize) {
        match e {
            Expr::Name(n) => {
                let line = self.line_of(e);
                match n.ctx {
                    ast::ExprContext::Load => self.load(scope, &n.id, line),
                    _ => self.bind(scope, &n.id, line, BindKind::Other),
                }
            }
            Expr::BoolOp(b) => b.values.iter().for_each(|v| self.expr(v, scope)),
            Expr::NamedExpr(n) => {
                self.expr(&n.value, scope);
                let target_scope = self.walrus_scope(scope);
                self.target(&n.target, target_scope);
            }
            Expr::BinOp(b) => {
                self.expr(&b.left, scope);
                self.expr(&b.right, scope);
            }
            Expr::UnaryOp(u) => self.expr(&u.operand, scope),
            Expr::Lambda(l) => {
                let line = self.line_of(e);
                let qual = format!("{}.<lambda>", self.out.scopes[scope].qualname);
                let inner = self.push_scope(ScopeKind::Lambda, qual, scope, line);
                self.arguments(&l.args, scope, inner);
                self.expr(&l.body, inner);
            }
            Expr::IfExp(i) => {
                self.expr(&i.test, scope);
                self.expr(&i.body, scope);
                self.expr(&i.orelse, scope);
            }
            Expr::Dict(d) => {
                d.keys.iter().flatten().for_each(|k| self.expr(k, scope));
                d.values.iter().for_each(|v| self.expr(v, scope));
            }
            Expr::Set(s) => s.elts.iter().for_each(|v| self.expr(v, scope)),
            Expr::ListComp(c) => self.comprehension(&c.generators, &[&c.elt], scope),
            Expr::SetComp(c) => self.comprehension(&c.generators, &[&c.elt], scope),
            Expr::GeneratorExp(c) => self.comprehension(&c.generators, &[&c.elt], scope),
            Expr::DictComp(c) => self.comprehension(&c.generators, &[&c.key, &c.value], scope),
            Expr::Await(a) => self.expr(&a.value, scope),
            Expr::Yield(y) => {
                if let Some(v) = &y.value {
                    self.expr(v, scope);
                }
            }
            Expr::YieldFrom(y) => self.expr(&y.value, scope),
            Expr::Compare(c) => {
                self.expr(&c.left, scope);
                c.comparators.iter().for_each(|v| self.expr(v, scope));
            }
            Expr::Call(c) => {
                let line = self.line_of(e);
                self.check_dynamic_import(c, line);
                self.expr(&c.func, scope);
                c.args.iter().for_each(|a| self.expr(a, scope));
                c.keywords.iter().for_each(|k| self.expr(&k.value, scope));
            }
            Expr::FormattedValue(f) => {
                self.expr(&f.value, scope);
                if let Some(spec) = &f.format_spec {
                    self.expr(spec, scope);
                }
            }
            Expr::JoinedStr(j) => j.values.iter().for_each(|v| self.expr(v, scope)),
            Expr::Constant(_) => {}
            Expr::Attribute(a) => self.expr(&a.value, scope),
            Expr::Subscript(s) => {
                self.expr(&s.value, scope);
                self.expr(&s.slice, scope);
            }
            Expr::Starred(s) => self.expr(&s.value, scope),
            Expr::List(l) => l.elts.iter().for_each(|v| self.expr(v, scope)),
            Expr::Tuple(t) => t.elts.iter().for_each(|v| self.expr(v, scope)),
            Expr::Slice(s) => {
                for part in [&s.lower, &s.upper, &s.step].into_iter().flatten() {
                    self.expr(part, scope);
                }
            }
        }
    }
}

/// Lookup from function qualified name to scope id.
pub fn function_scopes(a: &ModuleAnalysis) -> HashMap<&str, usize> {
    a.scopes
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == ScopeKind::Function)
        .map(|(i, s)| (s.qualname.as_str(), i))
        .collect()
}
