//! Weakest preconditions over the lowered IR.
//!
//! The calculus is focused: one obligation is the target and is asserted;
//! every other obligation on the way is assumed (it has its own VC).
//! Havoc is universal quantification over the program variable itself;
//! substitution renames binders when needed, so shadowing is harmless.

use crate::ast::{BinOp, Expr, Program};
use crate::logic::{self, and, conj, forall, implies, not};

use super::lower::{Effect, IStmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Target {
    /// Every obligation is asserted: the classic, unfocused calculus.
    All,
    One(usize),
}

impl Target {
    fn hits(self, obligation: usize) -> bool {
        match self {
            Target::All => true,
            Target::One(t) => t == obligation,
        }
    }
}

pub(crate) struct Wp<'p> {
    pub program: &'p Program,
    pub target: Target,
    /// Postcondition established by `return`; may mention `\result`.
    pub post: Expr,
}

impl Wp<'_> {
    pub fn block(&self, stmts: &[IStmt], q: Expr) -> Expr {
        stmts.iter().rev().fold(q, |q, s| self.stmt(s, q))
    }

    fn guarded(&self, obligation: usize, p: Expr, q: Expr) -> Expr {
        if self.target.hits(obligation) {
            // p && (p ==> q) simplifies to p && q.
            and(p, q)
        } else {
            implies(p, q)
        }
    }

    pub fn effects(&self, effects: &[Effect], q: Expr) -> Expr {
        effects.iter().rev().fold(q, |q, e| self.effect(e, q))
    }

    fn effect(&self, e: &Effect, q: Expr) -> Expr {
        match e {
            Effect::Guard {
                divisor,
                obligation,
            } => {
                let nonzero = Expr::binary(BinOp::Ne, divisor.clone(), Expr::Int(0));
                self.guarded(*obligation, nonzero, q)
            }
            Effect::Call {
                tmp,
                callee,
                args,
                obligation,
            } => {
                let Some(f) = self.program.function(callee) else {
                    return q;
                };
                let actuals = f.params.iter().cloned().zip(args.iter().cloned()).collect();
                let pre = conj(
                    f.contract
                        .requires
                        .iter()
                        .map(|r| logic::subst(&r.pred, &actuals)),
                );
                let result = Expr::Var(tmp.clone());
                let post = conj(f.contract.ensures.iter().map(|e| {
                    logic::subst(&logic::subst_result(&e.pred, &result), &actuals)
                }));
                let after = forall([tmp.clone()], implies(post, q));
                match obligation {
                    Some(o) => self.guarded(*o, pre, after),
                    None => implies(pre, after),
                }
            }
        }
    }

    fn stmt(&self, s: &IStmt, q: Expr) -> Expr {
        match s {
            IStmt::Effects(es) => self.effects(es, q),
            IStmt::Assign(x, e) => logic::subst1(&q, x, e),
            IStmt::Havoc(x) => forall([x.clone()], q),
            IStmt::If(c, t, e) => and(
                implies(c.clone(), self.block(t, q.clone())),
                implies(not(c.clone()), self.block(e, q)),
            ),
            IStmt::Assert(p, o) => self.guarded(*o, p.clone(), q),
            IStmt::Return(e) => logic::subst_result(&self.post, e),
            IStmt::While {
                cond_effects,
                cond,
                invariants,
                modified,
                body,
            } => {
                let init = conj(
                    invariants
                        .iter()
                        .filter(|i| self.target.hits(i.init))
                        .map(|i| i.pred.clone()),
                );
                let preserved = conj(
                    invariants
                        .iter()
                        .filter(|i| self.target.hits(i.preserve))
                        .map(|i| i.pred.clone()),
                );
                let assumed = conj(invariants.iter().map(|i| i.pred.clone()));
                let step = and(
                    implies(cond.clone(), self.block(body, preserved)),
                    implies(not(cond.clone()), q),
                );
                let arbitrary_iteration = forall(
                    modified.iter().cloned(),
                    implies(assumed, self.effects(cond_effects, step)),
                );
                and(init, arbitrary_iteration)
            }
        }
    }
}
