//! Concrete replay of a function against its proof obligations.
//!
//! Executes the same lowered form the VC generator works on, so every
//! obligation met at run time carries the id of its VC. A solver model is
//! a genuine counterexample when the replay violates the VC's obligation.

use std::collections::{BTreeMap, BTreeSet};

use super::{EvalError, Env, Interp, Scalar};
use crate::ast::Expr;
use crate::ids::PropertyId;
use crate::transform::TransformOutput;
use crate::vcgen::lower::{self, Effect, IStmt, Lowered};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    /// False when the inputs violate the function's own requires; nothing
    /// else is checked then.
    pub requires_hold: bool,
    pub violated: BTreeSet<PropertyId>,
    /// Set when execution stopped early.
    pub error: Option<EvalError>,
}

impl Replay {
    pub fn violates(&self, id: &PropertyId) -> bool {
        self.requires_hold && self.violated.contains(id)
    }
}

struct Monitor<'a, 'p, S> {
    interp: &'a Interp<'p, S>,
    lowered: &'a Lowered,
    env: Env<S>,
    violated: BTreeSet<usize>,
}

impl<S: Scalar> Monitor<'_, '_, S> {
    fn check(&mut self, pred: &Expr, obligation: usize) -> Result<(), EvalError> {
        if !self.interp.bool(pred, &self.env)? {
            self.violated.insert(obligation);
        }
        Ok(())
    }

    fn effects(&mut self, effects: &[Effect]) -> Result<(), EvalError> {
        for e in effects {
            match e {
                Effect::Guard {
                    divisor,
                    obligation,
                } => {
                    if self.interp.int(divisor, &self.env)?.is_zero() {
                        self.violated.insert(*obligation);
                        return Err(EvalError::DivisionByZero);
                    }
                }
                Effect::Call {
                    tmp,
                    callee,
                    args,
                    obligation,
                } => {
                    let args = args
                        .iter()
                        .map(|a| self.interp.int(a, &self.env))
                        .collect::<Result<Vec<S>, _>>()?;
                    if let (Some(o), Some(f)) = (obligation, self.interp.program.function(callee)) {
                        let callee_env = Env::from_bindings(f.params.iter().cloned().zip(args.iter().cloned()));
                        for r in &f.contract.requires {
                            if !self.interp.bool(&r.pred, &callee_env)? {
                                self.violated.insert(*o);
                            }
                        }
                    }
                    let v = self.interp.invoke(callee, &args, 1, false)?.value;
                    self.env.bind(tmp.clone(), v);
                }
            }
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[IStmt]) -> Result<Option<S>, EvalError> {
        for s in stmts {
            self.interp.tick()?;
            match s {
                IStmt::Effects(es) => self.effects(es)?,
                IStmt::Assign(x, e) => {
                    let v = self.interp.int(e, &self.env)?;
                    self.env.bind(x.clone(), v);
                }
                IStmt::Havoc(x) => self.env.declare(x),
                IStmt::If(c, t, e) => {
                    let branch = if self.interp.bool(c, &self.env)? { t } else { e };
                    if let Some(v) = self.block(branch)? {
                        return Ok(Some(v));
                    }
                }
                IStmt::While {
                    cond_effects,
                    cond,
                    invariants,
                    body,
                    ..
                } => {
                    for i in invariants {
                        self.check(&i.pred, i.init)?;
                    }
                    loop {
                        self.effects(cond_effects)?;
                        if !self.interp.bool(cond, &self.env)? {
                            break;
                        }
                        self.interp.tick()?;
                        let held: Vec<bool> = invariants
                            .iter()
                            .map(|i| self.interp.bool(&i.pred, &self.env))
                            .collect::<Result<_, _>>()?;
                        if let Some(v) = self.block(body)? {
                            return Ok(Some(v));
                        }
                        for (i, before) in invariants.iter().zip(held) {
                            // Preservation is only violated by an iteration
                            // that starts in a state satisfying the invariant.
                            if before {
                                self.check(&i.pred, i.preserve)?;
                            }
                        }
                    }
                }
                IStmt::Assert(p, o) => self.check(p, *o)?,
                IStmt::Return(e) => {
                    let v = self.interp.int(e, &self.env)?;
                    self.env.set_result(v.clone());
                    for (pred, o) in &self.lowered.ensures {
                        self.check(pred, *o)?;
                    }
                    return Ok(Some(v));
                }
            }
        }
        Ok(None)
    }
}

/// Runs `function` on `args`, reporting which obligations the run breaks.
/// Lowered code has a flat namespace; the renaming done by the transform
/// and the resolver's scoping rules keep that sound.
pub fn replay<S: Scalar>(interp: &Interp<'_, S>, output: &TransformOutput, function: &str, args: &[S]) -> Replay {
    let mut out = Replay {
        requires_hold: false,
        violated: BTreeSet::new(),
        error: None,
    };
    let program = interp.program;
    let Some(f) = program.function(function) else {
        out.error = Some(EvalError::UnknownFunction(function.to_string()));
        return out;
    };
    let wrapped = output
        .wrappers
        .iter()
        .find(|w| w.wrapper == f.name)
        .map(|w| w.property.as_str());
    let lowered = match lower::lower(program, f, wrapped) {
        Ok(l) => l,
        Err(d) => {
            out.error = Some(EvalError::Type(d[0].message.clone()));
            return out;
        }
    };
    let params: BTreeMap<_, _> = f.params.iter().cloned().zip(args.iter().cloned()).collect();
    let env = Env::from_bindings(params);
    interp.steps.set(0);
    let requires = f
        .contract
        .requires
        .iter()
        .map(|r| interp.bool(&r.pred, &env))
        .collect::<Result<Vec<bool>, _>>();
    match requires {
        Ok(v) if v.iter().all(|b| *b) => out.requires_hold = true,
        Ok(_) => return out,
        Err(e) => {
            out.error = Some(e);
            return out;
        }
    }
    let mut m = Monitor {
        interp,
        lowered: &lowered,
        env,
        violated: BTreeSet::new(),
    };
    if let Err(e) = m.block(&lowered.body) {
        out.error = Some(e);
    }
    out.violated = m
        .violated
        .into_iter()
        .map(|i| lowered.obligations[i].id.clone())
        .collect();
    out
}
