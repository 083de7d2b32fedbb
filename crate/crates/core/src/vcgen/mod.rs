//! Verification-condition generation.
//!
//! Every obligation of a function body (asserts, postconditions, loop
//! invariant initiation and preservation, callee preconditions, division
//! guards) becomes one closed formula. Calls outside wrappers are handled
//! modularly through the callee contract, bridge included, which is how
//! lemmas over `_acsl` counterparts become applicable.

pub(crate) mod lower;
mod wp;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ast::{Block, Expr, FunctionDef, Ident, LogicDecl, Program, Stmt};
use crate::check::call_closure;
use crate::diag::{Diagnostic, Span};
use crate::ids::PropertyId;
use crate::logic::{self, conj, forall, implies};
use crate::status::StatusDb;
use crate::transform::TransformOutput;

use wp::{Target, Wp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VcKind {
    Assert,
    Ensures,
    InvariantInit,
    InvariantPreserve,
    RequiresAtCall,
    DivisionGuard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationCondition {
    pub id: PropertyId,
    pub kind: VcKind,
    pub function: Ident,
    /// Closed and `\call`-free.
    pub goal: Expr,
    /// Lemmas assumed by this VC.
    pub hypotheses: Vec<(PropertyId, Expr)>,
    /// Callee postconditions assumed at call sites; proving the goal
    /// establishes it only relative to these.
    pub assumes: Vec<PropertyId>,
    pub span: Span,
}

impl VerificationCondition {
    /// Every property the proof of this VC depends on.
    pub fn dependencies(&self) -> Vec<PropertyId> {
        let mut deps: Vec<PropertyId> = self.hypotheses.iter().map(|(id, _)| id.clone()).collect();
        deps.extend(self.assumes.iter().cloned());
        deps
    }
}

/// Proof obligation ids and kinds, without building formulas. These are
/// the goal nodes of the status database.
pub fn obligations(output: &TransformOutput) -> Result<Vec<(PropertyId, VcKind)>, Vec<Diagnostic>> {
    let wrapper_props = wrapper_properties(output);
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for f in output.program.functions.iter().filter(|f| f.body.is_some()) {
        match lower::lower(&output.program, f, wrapper_props.get(f.name.as_str()).copied()) {
            Ok(l) => out.extend(l.obligations.into_iter().map(|o| (o.id, o.kind))),
            Err(d) => diags.extend(d),
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

fn wrapper_properties(output: &TransformOutput) -> BTreeMap<&str, &str> {
    output
        .wrappers
        .iter()
        .map(|w| (w.wrapper.as_str(), w.property.as_str()))
        .collect()
}

/// One VC per obligation, functions in program order and obligations in
/// source order within each function.
pub fn generate(
    output: &TransformOutput,
    db: &StatusDb,
) -> Result<Vec<VerificationCondition>, Vec<Diagnostic>> {
    let program = &output.program;
    let wrapper_props = wrapper_properties(output);
    let property_order: BTreeMap<&str, usize> = program
        .relational_properties()
        .enumerate()
        .map(|(i, (_, p))| (p.name.as_str(), i))
        .collect();

    let mut vcs = Vec::new();
    let mut diags = Vec::new();
    for f in program.functions.iter().filter(|f| f.body.is_some()) {
        let wrapped = wrapper_props.get(f.name.as_str()).copied();
        let lowered = match lower::lower(program, f, wrapped) {
            Ok(l) => l,
            Err(d) => {
                diags.extend(d);
                continue;
            }
        };
        let lemmas = usable_lemmas(program, db, f, wrapped.map(|p| property_order[p]));
        let assumes = assumed_contracts(program, f);
        for (index, ob) in lowered.obligations.iter().enumerate() {
            let post = lowered
                .ensures
                .iter()
                .find(|(_, o)| *o == index)
                .map_or(Expr::Bool(true), |(e, _)| e.clone());
            let w = Wp {
                program,
                target: Target::One(index),
                post,
            };
            let body = w.block(&lowered.body, Expr::Bool(true));
            let goal = close(f, body);
            let hypotheses = relevant(&goal, &lemmas);
            vcs.push(VerificationCondition {
                id: ob.id.clone(),
                kind: ob.kind,
                function: f.name.clone(),
                goal,
                hypotheses,
                assumes: assumes.clone(),
                span: ob.span,
            });
        }
    }
    if diags.is_empty() {
        Ok(vcs)
    } else {
        Err(diags)
    }
}

fn close(f: &FunctionDef, body: Expr) -> Expr {
    let pre = conj(f.contract.requires.iter().map(|r| r.pred.clone()));
    let closed = forall(f.params.iter().cloned(), implies(pre, body));
    debug_assert!(
        logic::free_vars(&closed).is_empty(),
        "VC for '{}' is not closed: {:?}",
        f.name,
        logic::free_vars(&closed)
    );
    closed
}

/// Lemmas `f` may assume. A wrapper may only use lemmas of properties
/// declared before its own, which rules out its own lemma and any cycle
/// between wrappers. Any other function may not use a lemma whose
/// property involves it, since that lemma's proof may rest on the
/// function's own contract.
fn usable_lemmas(
    program: &Program,
    db: &StatusDb,
    f: &FunctionDef,
    wrapper_of: Option<usize>,
) -> Vec<(PropertyId, Expr)> {
    let mut out = Vec::new();
    for d in &program.logic_decls {
        let LogicDecl::Lemma { name, pred, .. } = d else {
            continue;
        };
        let id = PropertyId::lemma(name);
        if !db.lemma_usable(&id) {
            continue;
        }
        let allowed = match (program.lemma_origin(name), wrapper_of) {
            (None, _) => true,
            (Some((_, prop)), Some(own)) => program
                .relational_properties()
                .position(|(_, p)| p.name == prop.name)
                .is_some_and(|i| i < own),
            (Some((_, prop)), None) => !call_closure(program, prop)
                .iter()
                .any(|g| g.name == f.name),
        };
        if allowed {
            out.push((id, pred.clone()));
        }
    }
    out
}

/// Lemmas sharing a logic symbol with the goal, closed under sharing.
fn relevant(goal: &Expr, lemmas: &[(PropertyId, Expr)]) -> Vec<(PropertyId, Expr)> {
    let symbols: Vec<BTreeSet<Ident>> = lemmas
        .iter()
        .map(|(_, e)| logic::applied_functions(e))
        .collect();
    let mut reached = logic::applied_functions(goal);
    let mut taken = vec![false; lemmas.len()];
    loop {
        let mut changed = false;
        for (i, s) in symbols.iter().enumerate() {
            if !taken[i] && !s.is_disjoint(&reached) {
                taken[i] = true;
                reached.extend(s.iter().cloned());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    lemmas
        .iter()
        .zip(taken)
        .filter(|(_, t)| *t)
        .map(|(l, _)| l.clone())
        .collect()
}

/// Postconditions of body-present callees that `f`'s VCs assume. A
/// function's own postconditions are excluded: using them at a recursive
/// call is the usual partial-correctness rule.
fn assumed_contracts(program: &Program, f: &FunctionDef) -> Vec<PropertyId> {
    let mut callees = BTreeSet::new();
    if let Some(b) = &f.body {
        collect_callees(b, &mut callees);
    }
    let mut out = Vec::new();
    for name in callees {
        if name == f.name {
            continue;
        }
        let Some(g) = program.function(&name) else {
            continue;
        };
        if g.body.is_none() {
            continue;
        }
        let n = g.contract.ensures.iter().filter(|e| !e.is_bridge()).count();
        out.extend((1..=n).map(|i| PropertyId::ensures(&g.name, i)));
    }
    out
}

fn collect_callees(b: &Block, out: &mut BTreeSet<Ident>) {
    use crate::ast::StmtKind::*;
    let expr = |e: &Expr, out: &mut BTreeSet<Ident>| {
        e.visit(&mut |e| {
            if let Expr::App(g, _) = e {
                out.insert(g.clone());
            }
        })
    };
    for s in &b.stmts {
        match &s.kind {
            Decl { init, .. } => {
                if let Some(e) = init {
                    expr(e, out)
                }
            }
            Assign { value, .. } => expr(value, out),
            Return(e) => expr(e, out),
            If {
                cond,
                then_branch,
                else_branch,
            } => {
                expr(cond, out);
                collect_callees(then_branch, out);
                if let Some(e) = else_branch {
                    collect_callees(e, out);
                }
            }
            While { cond, body, .. } => {
                expr(cond, out);
                collect_callees(body, out);
            }
            Assert { .. } => {}
            Block(b) => collect_callees(b, out),
        }
    }
}

/// Unfocused weakest precondition of a statement list: every obligation
/// met along the way (asserts, guards, callee preconditions, invariants)
/// is conjoined. `post` may mention `\result`, which `return` binds.
pub fn wp(program: &Program, stmts: &[Stmt], post: Expr) -> Result<Expr, Vec<Diagnostic>> {
    let scratch = FunctionDef {
        name: "wp$".into(),
        params: Vec::new(),
        body: Some(Block::new(stmts.to_vec())),
        contract: Default::default(),
        span: Span::default(),
    };
    let lowered = lower::lower(program, &scratch, None)?;
    let w = Wp {
        program,
        target: Target::All,
        post: post.clone(),
    };
    Ok(w.block(&lowered.body, post))
}
