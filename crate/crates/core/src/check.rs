//! Name resolution and typechecking.
//!
//! Besides ordinary well-formedness this enforces the restrictions that make
//! relational properties provable by self-composition: the functions a
//! property calls (and everything they call) are pure and non-recursive, and
//! a property is attached to the last function it mentions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Deref;

use crate::ast::*;
use crate::diag::{Diagnostic, Span};

/// A program that passed [`typecheck`]. Immutable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckedProgram(Program);

impl CheckedProgram {
    pub fn program(&self) -> &Program {
        &self.0
    }

    pub fn into_inner(self) -> Program {
        self.0
    }
}

impl Deref for CheckedProgram {
    type Target = Program;

    fn deref(&self) -> &Program {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Bool => "predicate",
        }
    }
}

/// Where an expression occurs; decides which constructs are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Code,
    Requires,
    Ensures,
    /// Assertions and loop invariants.
    Assert,
    Relational,
    Lemma,
}

impl Ctx {
    fn is_logic(self) -> bool {
        self != Ctx::Code
    }
}

/// Program functions called (directly) from each function's body.
pub fn call_graph(program: &Program) -> HashMap<&str, BTreeSet<&str>> {
    fn block<'a>(b: &'a Block, out: &mut BTreeSet<&'a str>) {
        let expr = |e: &'a Expr, out: &mut BTreeSet<&'a str>| {
            e.visit(&mut |e| {
                if let Expr::App(f, _) = e {
                    out.insert(f.as_str());
                }
            })
        };
        for s in &b.stmts {
            match &s.kind {
                StmtKind::Decl { init, .. } => {
                    if let Some(e) = init {
                        expr(e, out)
                    }
                }
                StmtKind::Assign { value, .. } => expr(value, out),
                StmtKind::Return(e) => expr(e, out),
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    expr(cond, out);
                    block(then_branch, out);
                    if let Some(e) = else_branch {
                        block(e, out);
                    }
                }
                StmtKind::While { cond, body, .. } => {
                    expr(cond, out);
                    block(body, out);
                }
                StmtKind::Block(b) => block(b, out),
                StmtKind::Assert { .. } => {}
            }
        }
    }
    program
        .functions
        .iter()
        .map(|f| {
            let mut callees = BTreeSet::new();
            if let Some(b) = &f.body {
                block(b, &mut callees);
            }
            (f.name.as_str(), callees)
        })
        .collect()
}

/// Finds a call cycle reachable from `start`, returned as `[f, g, ..., f]`.
fn find_cycle<'a>(graph: &HashMap<&'a str, BTreeSet<&'a str>>, start: &'a str) -> Option<Vec<&'a str>> {
    fn dfs<'a>(
        graph: &HashMap<&'a str, BTreeSet<&'a str>>,
        node: &'a str,
        path: &mut Vec<&'a str>,
        done: &mut HashSet<&'a str>,
    ) -> Option<Vec<&'a str>> {
        if let Some(pos) = path.iter().position(|n| *n == node) {
            let mut cycle = path[pos..].to_vec();
            cycle.push(node);
            return Some(cycle);
        }
        if done.contains(node) {
            return None;
        }
        path.push(node);
        if let Some(next) = graph.get(node) {
            for n in next {
                if let Some(c) = dfs(graph, n, path, done) {
                    return Some(c);
                }
            }
        }
        path.pop();
        done.insert(node);
        None
    }
    dfs(graph, start, &mut Vec::new(), &mut HashSet::new())
}

/// Every function reachable from the property's `\call`s, callees before
/// callers; among functions that are ready at the same time the one
/// declared first comes first. Assumes the closure is acyclic.
pub fn call_closure<'p>(program: &'p Program, prop: &RelationalProperty) -> Vec<&'p FunctionDef> {
    let graph = call_graph(program);
    let mut reachable: BTreeSet<usize> = BTreeSet::new();
    let mut stack: Vec<&str> = prop
        .calls_innermost_first()
        .into_iter()
        .map(|c| c.callee.as_str())
        .collect();
    while let Some(f) = stack.pop() {
        if let Some(i) = program.function_index(f) {
            if reachable.insert(i) {
                stack.extend(graph.get(f).into_iter().flatten().copied());
            }
        }
    }
    let mut order = Vec::new();
    let mut emitted: HashSet<usize> = HashSet::new();
    while emitted.len() < reachable.len() {
        let next = reachable.iter().copied().find(|&i| {
            !emitted.contains(&i)
                && graph
                    .get(program.functions[i].name.as_str())
                    .into_iter()
                    .flatten()
                    .filter_map(|c| program.function_index(c))
                    .all(|c| emitted.contains(&c))
        });
        match next {
            Some(i) => {
                emitted.insert(i);
                order.push(&program.functions[i]);
            }
            // Cyclic input; typecheck rejects it before we get here.
            None => break,
        }
    }
    order
}

struct Resolver<'p> {
    program: &'p Program,
    diags: Vec<Diagnostic>,
}

impl<'p> Resolver<'p> {
    fn err(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, msg));
    }

    fn run(&mut self) {
        let mut seen = HashSet::new();
        for f in &self.program.functions {
            if !seen.insert(f.name.as_str()) {
                self.err(f.span, format!("duplicate function '{}'", f.name));
            }
        }
        let mut seen = HashSet::new();
        for d in &self.program.logic_decls {
            if !seen.insert(d.name()) {
                self.err(d.span(), format!("duplicate logic declaration '{}'", d.name()));
            }
        }
        let mut props = HashSet::new();
        for (index, f) in self.program.functions.iter().enumerate() {
            let mut names: HashSet<&str> = HashSet::new();
            for p in &f.params {
                if !names.insert(p) {
                    self.err(f.span, format!("duplicate parameter '{p}' in '{}'", f.name));
                }
            }
            let params: Vec<&str> = f.params.iter().map(String::as_str).collect();
            for c in &f.contract.requires {
                self.expr(&c.pred, Ctx::Requires, &params, c.span);
            }
            for c in &f.contract.ensures {
                self.expr(&c.pred, Ctx::Ensures, &params, c.span);
            }
            for r in &f.contract.relational {
                if !props.insert(r.name.as_str()) {
                    self.err(r.span, format!("duplicate relational property '{}'", r.name));
                }
                self.relational(index, f, r);
            }
            if let Some(b) = &f.body {
                let mut scopes = vec![params.clone()];
                let mut all: HashSet<&str> = params.iter().copied().collect();
                self.block(f, b, &mut scopes, &mut all);
            }
        }
        for d in &self.program.logic_decls {
            if let LogicDecl::Lemma { pred, span, name } = d {
                self.expr(pred, Ctx::Lemma, &[], *span);
                if self.program.lemma_origin(name).is_none() {
                    self.err(
                        *span,
                        format!("lemma '{name}' does not correspond to a relational property"),
                    );
                }
            }
        }
    }

    fn relational(&mut self, host_index: usize, host: &FunctionDef, r: &RelationalProperty) {
        let mut seen = HashSet::new();
        for b in &r.binders {
            if !seen.insert(b) {
                self.err(r.span, format!("duplicate bound variable '{b}' in '{}'", r.name));
            }
        }
        let binders: Vec<&str> = r.binders.iter().map(String::as_str).collect();
        self.expr(&r.body, Ctx::Relational, &binders, r.span);
        for call in r.calls_innermost_first() {
            match self.program.function_index(&call.callee) {
                None => {}
                Some(i) if i > host_index => self.err(
                    r.span,
                    format!(
                        "relational property '{}' refers to '{}', which is declared after '{}'; \
                         a relational property must be attached to the last function it involves",
                        r.name, call.callee, host.name
                    ),
                ),
                Some(_) => {}
            }
        }
    }

    fn block<'a>(
        &mut self,
        f: &'a FunctionDef,
        b: &'a Block,
        scopes: &mut Vec<Vec<&'a str>>,
        all: &mut HashSet<&'a str>,
    ) {
        scopes.push(Vec::new());
        for s in &b.stmts {
            self.stmt(f, s, scopes, all);
        }
        scopes.pop();
    }

    fn stmt<'a>(
        &mut self,
        f: &'a FunctionDef,
        s: &'a Stmt,
        scopes: &mut Vec<Vec<&'a str>>,
        all: &mut HashSet<&'a str>,
    ) {
        let visible: Vec<&str> = scopes.iter().flatten().copied().collect();
        match &s.kind {
            StmtKind::Decl { name, init } => {
                if let Some(e) = init {
                    self.expr(e, Ctx::Code, &visible, s.span);
                }
                if !all.insert(name) {
                    self.err(s.span, format!("redeclaration of '{name}' in '{}'", f.name));
                }
                scopes.last_mut().unwrap().push(name);
            }
            StmtKind::Assign { name, value } => {
                if !visible.contains(&name.as_str()) {
                    self.err(s.span, format!("unknown variable '{name}'"));
                }
                self.expr(value, Ctx::Code, &visible, s.span);
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expr(cond, Ctx::Code, &visible, s.span);
                self.block(f, then_branch, scopes, all);
                if let Some(e) = else_branch {
                    self.block(f, e, scopes, all);
                }
            }
            StmtKind::While {
                cond,
                invariants,
                body,
            } => {
                self.expr(cond, Ctx::Code, &visible, s.span);
                for i in invariants {
                    self.expr(i, Ctx::Assert, &visible, s.span);
                }
                self.block(f, body, scopes, all);
            }
            StmtKind::Return(e) => self.expr(e, Ctx::Code, &visible, s.span),
            StmtKind::Assert { pred, .. } => self.expr(pred, Ctx::Assert, &visible, s.span),
            StmtKind::Block(b) => self.block(f, b, scopes, all),
        }
    }

    fn expr(&mut self, e: &Expr, ctx: Ctx, vars: &[&str], span: Span) {
        match e {
            Expr::Int(_) | Expr::Bool(_) | Expr::Result => {}
            Expr::Var(v) => {
                if !vars.contains(&v.as_str()) {
                    let msg = if ctx == Ctx::Relational {
                        format!("free variable '{v}' in relational property (not bound by its \\forall)")
                    } else {
                        format!("unknown identifier '{v}'")
                    };
                    self.err(span, msg);
                }
            }
            Expr::Unary(_, e) => self.expr(e, ctx, vars, span),
            Expr::Binary(_, a, b) => {
                self.expr(a, ctx, vars, span);
                self.expr(b, ctx, vars, span);
            }
            Expr::App(name, args) => {
                if ctx.is_logic() {
                    if self.program.logic_function(name).is_none() {
                        if self.program.function(name).is_some() {
                            self.err(
                                span,
                                format!(
                                    "program function '{name}' used as a logic function; \
                                     use \\call({name}, ...) in a relational property"
                                ),
                            );
                        } else {
                            self.err(span, format!("unknown logic function '{name}'"));
                        }
                    }
                } else if self.program.function(name).is_none() {
                    self.err(span, format!("unknown function '{name}'"));
                } else if name.starts_with(WRAPPER_PREFIX) {
                    self.err(span, format!("generated wrapper '{name}' cannot be called"));
                }
                for a in args {
                    self.expr(a, ctx, vars, span);
                }
            }
            Expr::Call(c) => {
                if self.program.function(&c.callee).is_none() {
                    self.err(span, format!("unknown function {}", c.callee));
                }
                for a in &c.args {
                    self.expr(a, ctx, vars, span);
                }
            }
            Expr::Quant(_, bound, body) => {
                let mut inner = vars.to_vec();
                inner.extend(bound.iter().map(String::as_str));
                self.expr(body, ctx, &inner, span);
            }
        }
    }
}

/// Checks that every identifier refers to a declaration and that relational
/// properties are attached to the last function they involve.
pub fn resolve(program: &Program) -> Result<(), Vec<Diagnostic>> {
    let mut r = Resolver {
        program,
        diags: Vec::new(),
    };
    r.run();
    if r.diags.is_empty() {
        Ok(())
    } else {
        Err(r.diags)
    }
}

struct TypeChecker<'p> {
    program: &'p Program,
    graph: HashMap<&'p str, BTreeSet<&'p str>>,
    diags: Vec<Diagnostic>,
}

impl<'p> TypeChecker<'p> {
    fn err(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, msg));
    }

    fn expect(&mut self, e: &Expr, ctx: Ctx, want: Ty, span: Span) {
        if let Some(got) = self.infer(e, ctx, span) {
            if got != want {
                self.err(
                    span,
                    format!("expected {}, found {}", want.name(), got.name()),
                );
            }
        }
    }

    fn infer(&mut self, e: &Expr, ctx: Ctx, span: Span) -> Option<Ty> {
        match e {
            Expr::Int(_) | Expr::Var(_) => Some(Ty::Int),
            Expr::Bool(_) => {
                if ctx == Ctx::Code {
                    self.err(span, "'\\true'/'\\false' are only allowed in annotations");
                }
                Some(Ty::Bool)
            }
            Expr::Result => {
                if ctx != Ctx::Ensures {
                    self.err(span, "'\\result' is only allowed in ensures clauses");
                }
                Some(Ty::Int)
            }
            Expr::Unary(UnOp::Neg, e) => {
                self.expect(e, ctx, Ty::Int, span);
                Some(Ty::Int)
            }
            Expr::Unary(UnOp::Not, e) => {
                self.expect(e, ctx, Ty::Bool, span);
                Some(Ty::Bool)
            }
            Expr::Binary(op, a, b) => {
                if matches!(op, BinOp::Implies | BinOp::Iff) && ctx == Ctx::Code {
                    self.err(span, format!("'{}' is only allowed in annotations", op.symbol()));
                }
                let (arg, res) = if op.is_arith() {
                    (Ty::Int, Ty::Int)
                } else if op.is_comparison() {
                    (Ty::Int, Ty::Bool)
                } else {
                    (Ty::Bool, Ty::Bool)
                };
                self.expect(a, ctx, arg, span);
                self.expect(b, ctx, arg, span);
                Some(res)
            }
            Expr::App(name, args) => {
                let arity = if ctx.is_logic() {
                    self.program.logic_function(name).map(|p| p.len())
                } else {
                    self.program.function(name).map(|f| f.params.len())
                };
                if let Some(n) = arity {
                    if n != args.len() {
                        self.err(
                            span,
                            format!("'{name}' expects {n} argument(s), got {}", args.len()),
                        );
                    }
                }
                for a in args {
                    self.expect(a, ctx, Ty::Int, span);
                }
                Some(Ty::Int)
            }
            Expr::Call(c) => {
                if ctx != Ctx::Relational {
                    self.err(span, "'\\call' is only allowed in relational properties");
                }
                if let Some(f) = self.program.function(&c.callee) {
                    if f.params.len() != c.args.len() {
                        self.err(
                            span,
                            format!(
                                "\\call({}, ...) passes {} argument(s) but '{}' takes {}",
                                c.callee,
                                c.args.len(),
                                c.callee,
                                f.params.len()
                            ),
                        );
                    }
                }
                for a in &c.args {
                    self.expect(a, ctx, Ty::Int, span);
                }
                Some(Ty::Int)
            }
            Expr::Quant(_, _, body) => {
                if ctx == Ctx::Code {
                    self.err(span, "quantifiers are only allowed in annotations");
                }
                self.expect(body, ctx, Ty::Bool, span);
                Some(Ty::Bool)
            }
        }
    }

    fn run(&mut self) {
        for f in &self.program.functions {
            for c in &f.contract.requires {
                self.expect(&c.pred, Ctx::Requires, Ty::Bool, c.span);
            }
            for c in &f.contract.ensures {
                self.expect(&c.pred, Ctx::Ensures, Ty::Bool, c.span);
            }
            if let Some(b) = &f.body {
                let params: HashSet<&str> = f.params.iter().map(String::as_str).collect();
                self.block(b, &params);
                match self.returns(b) {
                    Some(true) => {}
                    Some(false) => self.err(
                        f.span,
                        format!("function '{}' must end with a return on every path", f.name),
                    ),
                    None => {}
                }
            }
            for r in &f.contract.relational {
                self.relational(r);
            }
        }
        for d in &self.program.logic_decls {
            match d {
                LogicDecl::Lemma { pred, span, .. } => {
                    self.expect(pred, Ctx::Lemma, Ty::Bool, *span);
                }
                LogicDecl::Function { params, span, name } => {
                    let unique: HashSet<&String> = params.iter().collect();
                    if unique.len() != params.len() {
                        self.err(*span, format!("duplicate parameter in logic function '{name}'"));
                    }
                }
            }
        }
    }

    fn block(&mut self, b: &Block, params: &HashSet<&str>) {
        for s in &b.stmts {
            match &s.kind {
                StmtKind::Decl { init, .. } => {
                    if let Some(e) = init {
                        self.expect(e, Ctx::Code, Ty::Int, s.span);
                    }
                }
                StmtKind::Assign { name, value } => {
                    if params.contains(name.as_str()) {
                        self.err(s.span, format!("cannot assign to parameter '{name}'"));
                    }
                    self.expect(value, Ctx::Code, Ty::Int, s.span);
                }
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    self.expect(cond, Ctx::Code, Ty::Bool, s.span);
                    self.block(then_branch, params);
                    if let Some(e) = else_branch {
                        self.block(e, params);
                    }
                }
                StmtKind::While {
                    cond,
                    invariants,
                    body,
                } => {
                    self.expect(cond, Ctx::Code, Ty::Bool, s.span);
                    for i in invariants {
                        self.expect(i, Ctx::Assert, Ty::Bool, s.span);
                    }
                    self.block(body, params);
                }
                StmtKind::Return(e) => self.expect(e, Ctx::Code, Ty::Int, s.span),
                StmtKind::Assert { pred, .. } => self.expect(pred, Ctx::Assert, Ty::Bool, s.span),
                StmtKind::Block(b) => self.block(b, params),
            }
        }
    }

    /// Whether the block ends in a return on every path. Returns must be the
    /// last statement of their path; `None` after reporting a violation.
    fn returns(&mut self, b: &Block) -> Option<bool> {
        let mut done = false;
        for s in &b.stmts {
            if done {
                self.err(s.span, "unreachable statement after return");
                return None;
            }
            done = match &s.kind {
                StmtKind::Return(_) => true,
                StmtKind::Block(b) => self.returns(b)?,
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    let t = self.returns(then_branch)?;
                    let e = match else_branch {
                        Some(e) => self.returns(e)?,
                        None => false,
                    };
                    if t != e {
                        self.err(
                            s.span,
                            "return must end every path: only one branch of this 'if' returns",
                        );
                        return None;
                    }
                    t
                }
                StmtKind::While { body, .. } => {
                    if contains_return(body) {
                        self.err(s.span, "return is not allowed inside a loop");
                        return None;
                    }
                    false
                }
                _ => false,
            };
        }
        Some(done)
    }

    fn relational(&mut self, r: &RelationalProperty) {
        self.expect(&r.body, Ctx::Relational, Ty::Bool, r.span);
        let calls = r.calls_innermost_first();
        if calls.is_empty() {
            self.err(
                r.span,
                format!("relational property '{}' contains no \\call", r.name),
            );
            return;
        }
        // Arguments must be program-evaluable terms over the outer binders.
        for c in &calls {
            for a in &c.args {
                self.call_argument(r, a);
            }
        }
        let mut reported = HashSet::new();
        for c in &calls {
            let Some(f) = self.program.function(&c.callee) else {
                continue;
            };
            if f.is_wrapper() {
                self.err(r.span, format!("generated wrapper '{}' cannot be used in \\call", f.name));
            }
            if let Some(cycle) = find_cycle(&self.graph, f.name.as_str()) {
                let text = cycle.join(" → ");
                if reported.insert(text.clone()) {
                    self.err(
                        r.span,
                        format!("recursive function in relational property: {text}"),
                    );
                }
                continue;
            }
        }
        for g in call_closure(self.program, r) {
            if !g.contract.assigns_nothing && reported.insert(g.name.clone()) {
                self.err(
                    r.span,
                    format!(
                        "impure function in \\call: '{}' is involved in relational property '{}' \
                         but lacks 'assigns \\nothing'",
                        g.name, r.name
                    ),
                );
            }
        }
    }

    fn call_argument(&mut self, r: &RelationalProperty, a: &Expr) {
        match a {
            Expr::Int(_) => {}
            Expr::Var(v) => {
                if !r.binders.contains(v) {
                    self.err(
                        r.span,
                        format!(
                            "\\call argument in '{}' uses '{v}', which is not bound by the \
                             property's outer \\forall",
                            r.name
                        ),
                    );
                }
            }
            Expr::Unary(UnOp::Neg, e) => self.call_argument(r, e),
            Expr::Binary(op, x, y) if op.is_arith() => {
                self.call_argument(r, x);
                self.call_argument(r, y);
            }
            Expr::Call(c) => c.args.iter().for_each(|x| self.call_argument(r, x)),
            _ => self.err(
                r.span,
                format!(
                    "\\call argument in '{}' must be an integer expression over bound variables and calls",
                    r.name
                ),
            ),
        }
    }
}

fn contains_return(b: &Block) -> bool {
    b.stmts.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::Block(b) | StmtKind::While { body: b, .. } => contains_return(b),
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => contains_return(then_branch) || else_branch.as_ref().is_some_and(contains_return),
        _ => false,
    })
}

/// Resolves and typechecks. Diagnostics come out in a deterministic order.
pub fn typecheck(program: Program) -> Result<CheckedProgram, Vec<Diagnostic>> {
    resolve(&program)?;
    let mut t = TypeChecker {
        program: &program,
        graph: call_graph(&program),
        diags: Vec::new(),
    };
    t.run();
    if t.diags.is_empty() {
        Ok(CheckedProgram(program))
    } else {
        Err(t.diags)
    }
}
