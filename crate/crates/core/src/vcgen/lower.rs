//! Lowering of function bodies to a small IR in which every proof
//! obligation has a number and every side effect of expression evaluation
//! (program calls, division) is an explicit step.

use crate::ast::*;
use crate::diag::{Diagnostic, Span};
use crate::ids::PropertyId;

use super::VcKind;

#[derive(Debug, Clone)]
pub(crate) enum Effect {
    /// Division or remainder by `divisor`.
    Guard { divisor: Expr, obligation: usize },
    /// `tmp = callee(args)`; the obligation is the callee precondition.
    Call {
        tmp: Ident,
        callee: Ident,
        args: Vec<Expr>,
        obligation: Option<usize>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Invariant {
    pub pred: Expr,
    pub init: usize,
    pub preserve: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum IStmt {
    Effects(Vec<Effect>),
    Assign(Ident, Expr),
    Havoc(Ident),
    If(Expr, Vec<IStmt>, Vec<IStmt>),
    While {
        cond_effects: Vec<Effect>,
        cond: Expr,
        invariants: Vec<Invariant>,
        modified: Vec<Ident>,
        body: Vec<IStmt>,
    },
    Assert(Expr, usize),
    Return(Expr),
}

#[derive(Debug, Clone)]
pub(crate) struct Obligation {
    pub id: PropertyId,
    pub kind: VcKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub(crate) struct Lowered {
    pub body: Vec<IStmt>,
    pub obligations: Vec<Obligation>,
    /// Non-bridge postconditions with their obligation numbers.
    pub ensures: Vec<(Expr, usize)>,
}

struct Lowerer<'p> {
    program: &'p Program,
    function: &'p FunctionDef,
    /// Property checked by the final assert, when lowering a wrapper.
    wrapper_property: Option<&'p str>,
    obligations: Vec<Obligation>,
    tmp_count: usize,
    asserts: usize,
    invariants: usize,
    calls: usize,
    guards: usize,
    diags: Vec<Diagnostic>,
}

impl Lowerer<'_> {
    fn obligation(&mut self, id: PropertyId, kind: VcKind, span: Span) -> usize {
        self.obligations.push(Obligation { id, kind, span });
        self.obligations.len() - 1
    }

    /// Pure version of `e`; effects are appended in evaluation order.
    fn lift(&mut self, e: &Expr, effects: &mut Vec<Effect>, span: Span) -> Expr {
        match e {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Result => e.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(self.lift(a, effects, span))),
            Expr::Binary(op, a, b) => {
                let a = self.lift(a, effects, span);
                let b = self.lift(b, effects, span);
                if matches!(op, BinOp::Div | BinOp::Rem) && !matches!(b, Expr::Int(n) if n != 0) {
                    self.guards += 1;
                    let id = PropertyId::division_guard(&self.function.name, self.guards);
                    let o = self.obligation(id, VcKind::DivisionGuard, span);
                    effects.push(Effect::Guard {
                        divisor: b.clone(),
                        obligation: o,
                    });
                }
                Expr::binary(*op, a, b)
            }
            Expr::App(f, args) => {
                let args: Vec<Expr> = args.iter().map(|a| self.lift(a, effects, span)).collect();
                self.tmp_count += 1;
                let tmp = format!("{f}$call{}", self.tmp_count);
                let has_pre = self
                    .program
                    .function(f)
                    .is_some_and(|g| !g.contract.requires.is_empty());
                let obligation = has_pre.then(|| {
                    self.calls += 1;
                    let id = PropertyId::requires_at_call(&self.function.name, self.calls);
                    self.obligation(id, VcKind::RequiresAtCall, span)
                });
                effects.push(Effect::Call {
                    tmp: tmp.clone(),
                    callee: f.clone(),
                    args,
                    obligation,
                });
                Expr::Var(tmp)
            }
            // Annotation-only constructs; typecheck keeps them out of code.
            Expr::Call(_) | Expr::Quant(..) => e.clone(),
        }
    }

    fn lift_stmt(&mut self, e: &Expr, span: Span, out: &mut Vec<IStmt>) -> Expr {
        let mut effects = Vec::new();
        let pure = self.lift(e, &mut effects, span);
        if !effects.is_empty() {
            out.push(IStmt::Effects(effects));
        }
        pure
    }

    fn block(&mut self, b: &Block, out: &mut Vec<IStmt>) {
        for s in &b.stmts {
            self.stmt(s, out);
        }
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<IStmt>) {
        let fname = self.function.name.clone();
        match &s.kind {
            StmtKind::Decl { name, init: None } => out.push(IStmt::Havoc(name.clone())),
            StmtKind::Decl {
                name,
                init: Some(e),
            }
            | StmtKind::Assign { name, value: e } => {
                let v = self.lift_stmt(e, s.span, out);
                out.push(IStmt::Assign(name.clone(), v));
            }
            StmtKind::Return(e) => {
                let v = self.lift_stmt(e, s.span, out);
                out.push(IStmt::Return(v));
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.lift_stmt(cond, s.span, out);
                let mut t = Vec::new();
                self.block(then_branch, &mut t);
                let mut e = Vec::new();
                if let Some(b) = else_branch {
                    self.block(b, &mut e);
                }
                out.push(IStmt::If(c, t, e));
            }
            StmtKind::While {
                cond,
                invariants,
                body,
            } => {
                if invariants.is_empty() {
                    self.diags.push(Diagnostic::error(
                        s.span,
                        format!("loop in '{fname}' has no loop invariant; one is required for proof"),
                    ));
                }
                let invariants = invariants
                    .iter()
                    .map(|pred| {
                        self.invariants += 1;
                        let k = self.invariants;
                        Invariant {
                            pred: pred.clone(),
                            init: self.obligation(
                                PropertyId::invariant_init(&fname, k),
                                VcKind::InvariantInit,
                                s.span,
                            ),
                            preserve: self.obligation(
                                PropertyId::invariant_preserve(&fname, k),
                                VcKind::InvariantPreserve,
                                s.span,
                            ),
                        }
                    })
                    .collect();
                let mut cond_effects = Vec::new();
                let cond = self.lift(cond, &mut cond_effects, s.span);
                let mut lowered = Vec::new();
                self.block(body, &mut lowered);
                let mut modified = Vec::new();
                assigned(body, &mut modified);
                out.push(IStmt::While {
                    cond_effects,
                    cond,
                    invariants,
                    modified,
                    body: lowered,
                });
            }
            StmtKind::Assert { label, pred } => {
                self.asserts += 1;
                let id = match (label, self.wrapper_property) {
                    (Some(l), Some(p)) if l == p => PropertyId::wrapper_assert(&fname),
                    (Some(l), _) => PropertyId::assert(&fname, l),
                    (None, _) => PropertyId::assert(&fname, &self.asserts.to_string()),
                };
                let o = self.obligation(id, VcKind::Assert, s.span);
                out.push(IStmt::Assert(pred.clone(), o));
            }
            StmtKind::Block(b) => self.block(b, out),
        }
    }
}

/// Variables a loop body may change.
fn assigned(b: &Block, out: &mut Vec<Ident>) {
    for s in &b.stmts {
        match &s.kind {
            StmtKind::Assign { name, .. } | StmtKind::Decl { name, .. } => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                assigned(then_branch, out);
                if let Some(e) = else_branch {
                    assigned(e, out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => assigned(body, out),
            StmtKind::Return(_) | StmtKind::Assert { .. } => {}
        }
    }
}

pub(crate) fn lower(
    program: &Program,
    function: &FunctionDef,
    wrapper_property: Option<&str>,
) -> Result<Lowered, Vec<Diagnostic>> {
    let mut l = Lowerer {
        program,
        function,
        wrapper_property,
        obligations: Vec::new(),
        tmp_count: 0,
        asserts: 0,
        invariants: 0,
        calls: 0,
        guards: 0,
        diags: Vec::new(),
    };
    let mut body = Vec::new();
    if let Some(b) = &function.body {
        l.block(b, &mut body);
    }
    let mut ensures = Vec::new();
    for (i, e) in function
        .contract
        .ensures
        .iter()
        .filter(|e| !e.is_bridge())
        .enumerate()
    {
        let o = l.obligation(
            PropertyId::ensures(&function.name, i + 1),
            VcKind::Ensures,
            e.span,
        );
        ensures.push((e.pred.clone(), o));
    }
    if l.diags.is_empty() {
        Ok(Lowered {
            body,
            obligations: l.obligations,
            ensures,
        })
    } else {
        Err(l.diags)
    }
}
