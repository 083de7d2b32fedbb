//! Concrete big-step interpreter.
//!
//! Used as the reference semantics for differential testing of the
//! transformation and for validating solver counterexamples. Predicates
//! are evaluated with quantifiers enumerated over a finite range, and an
//! `_acsl` counterpart is evaluated by running the function it mirrors.

mod oracle;
mod replay;
mod scalar;

pub use oracle::{differential, Mismatch, OracleConfig, OracleReport};
pub use replay::{replay, Replay};
pub use scalar::Scalar;

use std::cell::Cell;
use std::collections::BTreeMap;
use std::marker::PhantomData;

use thiserror::Error;

use crate::ast::*;

pub const DEFAULT_MAX_DEPTH: usize = 64;
pub const DEFAULT_QUANT_RANGE: (i64, i64) = (-16, 16);
pub const DEFAULT_STEP_LIMIT: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound variable '{0}'")]
    Unbound(Ident),
    #[error("variable '{0}' read before assignment")]
    Uninitialized(Ident),
    #[error("call depth limit of {0} exceeded")]
    DepthExceeded(usize),
    #[error("function '{0}' has no body")]
    MissingBody(Ident),
    #[error("unknown function '{0}'")]
    UnknownFunction(Ident),
    #[error("logic function '{0}' has no definition to evaluate")]
    Uninterpreted(Ident),
    #[error("integer overflow")]
    Overflow,
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("ill-typed expression: {0}")]
    Type(String),
    #[error("'{0}' ended without returning")]
    NoReturn(Ident),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterpConfig {
    pub max_depth: usize,
    /// Inclusive range enumerated for quantified variables.
    pub quant_range: (i64, i64),
    /// Statements and loop iterations allowed per top-level call.
    pub step_limit: u64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig {
            max_depth: DEFAULT_MAX_DEPTH,
            quant_range: DEFAULT_QUANT_RANGE,
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value<S> {
    Int(S),
    Bool(bool),
}

/// Variable bindings, innermost scope last. `None` marks a declared but
/// unassigned variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Env<S> {
    scopes: Vec<BTreeMap<Ident, Option<S>>>,
    result: Option<S>,
    depth: usize,
}

impl<S: Scalar> Default for Env<S> {
    fn default() -> Self {
        Env {
            scopes: vec![BTreeMap::new()],
            result: None,
            depth: 0,
        }
    }
}

impl<S: Scalar> Env<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bindings(bindings: impl IntoIterator<Item = (Ident, S)>) -> Self {
        let mut env = Self::new();
        for (k, v) in bindings {
            env.bind(k, v);
        }
        env
    }

    /// Declares `name` in the innermost scope.
    pub fn bind(&mut self, name: impl Into<Ident>, value: S) {
        self.scopes
            .last_mut()
            .expect("at least one scope")
            .insert(name.into(), Some(value));
    }

    fn declare(&mut self, name: &str) {
        self.scopes
            .last_mut()
            .expect("at least one scope")
            .insert(name.to_string(), None);
    }

    pub fn set_result(&mut self, value: S) {
        self.result = Some(value);
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn get(&self, name: &str) -> Result<S, EvalError> {
        for scope in self.scopes.iter().rev() {
            if let Some(v) = scope.get(name) {
                return v.clone().ok_or_else(|| EvalError::Uninitialized(name.to_string()));
            }
        }
        Err(EvalError::Unbound(name.to_string()))
    }

    fn assign(&mut self, name: &str, value: S) -> Result<(), EvalError> {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(slot) = scope.get_mut(name) {
                *slot = Some(value);
                return Ok(());
            }
        }
        Err(EvalError::Unbound(name.to_string()))
    }

    /// Every assigned variable, inner bindings shadowing outer ones.
    pub fn snapshot(&self) -> BTreeMap<Ident, S> {
        let mut out = BTreeMap::new();
        for scope in &self.scopes {
            for (k, v) in scope {
                if let Some(v) = v {
                    out.insert(k.clone(), v.clone());
                }
            }
        }
        out
    }
}

/// An executed assert of the top-level function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertOutcome {
    pub label: Option<Ident>,
    pub holds: Result<bool, EvalError>,
}

/// Result of running one function, with what the run observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run<S> {
    pub value: S,
    /// Variables in scope at the `return`.
    pub locals: BTreeMap<Ident, S>,
    pub asserts: Vec<AssertOutcome>,
}

enum Flow<S> {
    Normal,
    Return(S),
}

struct Frame<S> {
    env: Env<S>,
    record: bool,
    asserts: Vec<AssertOutcome>,
    locals: Option<BTreeMap<Ident, S>>,
}

pub struct Interp<'p, S> {
    program: &'p Program,
    config: InterpConfig,
    steps: Cell<u64>,
    _scalar: PhantomData<S>,
}

impl<'p, S: Scalar> Interp<'p, S> {
    pub fn new(program: &'p Program) -> Self {
        Self::with_config(program, InterpConfig::default())
    }

    pub fn with_config(program: &'p Program, config: InterpConfig) -> Self {
        Interp {
            program,
            config,
            steps: Cell::new(0),
            _scalar: PhantomData,
        }
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    pub fn config(&self) -> &InterpConfig {
        &self.config
    }

    fn tick(&self) -> Result<(), EvalError> {
        let n = self.steps.get() + 1;
        if n > self.config.step_limit {
            return Err(EvalError::StepLimit(self.config.step_limit));
        }
        self.steps.set(n);
        Ok(())
    }

    /// Runs `name` on `args`, recording its asserts and final locals.
    pub fn run(&self, name: &str, args: &[S]) -> Result<Run<S>, EvalError> {
        self.steps.set(0);
        self.invoke(name, args, 0, true)
    }

    /// The value of `name(args)`.
    pub fn call(&self, name: &str, args: &[S]) -> Result<S, EvalError> {
        self.run(name, args).map(|r| r.value)
    }

    fn invoke(&self, name: &str, args: &[S], depth: usize, record: bool) -> Result<Run<S>, EvalError> {
        if depth > self.config.max_depth {
            return Err(EvalError::DepthExceeded(self.config.max_depth));
        }
        let f = self
            .program
            .function(name)
            .ok_or_else(|| EvalError::UnknownFunction(name.to_string()))?;
        let body = f
            .body
            .as_ref()
            .ok_or_else(|| EvalError::MissingBody(name.to_string()))?;
        if f.params.len() != args.len() {
            return Err(EvalError::Type(format!(
                "'{name}' takes {} argument(s), got {}",
                f.params.len(),
                args.len()
            )));
        }
        let mut env = Env::from_bindings(f.params.iter().cloned().zip(args.iter().cloned()));
        env.depth = depth;
        let mut frame = Frame {
            env,
            record,
            asserts: Vec::new(),
            locals: None,
        };
        match self.block(body, &mut frame)? {
            Flow::Return(value) => Ok(Run {
                value,
                locals: frame.locals.unwrap_or_default(),
                asserts: frame.asserts,
            }),
            Flow::Normal => Err(EvalError::NoReturn(name.to_string())),
        }
    }

    fn block(&self, b: &Block, frame: &mut Frame<S>) -> Result<Flow<S>, EvalError> {
        frame.env.scopes.push(BTreeMap::new());
        let out = self.stmts(&b.stmts, frame);
        frame.env.scopes.pop();
        out
    }

    fn stmts(&self, stmts: &[Stmt], frame: &mut Frame<S>) -> Result<Flow<S>, EvalError> {
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&self, s: &Stmt, frame: &mut Frame<S>) -> Result<Flow<S>, EvalError> {
        self.tick()?;
        match &s.kind {
            StmtKind::Decl { name, init } => {
                match init {
                    Some(e) => {
                        let v = self.int(e, &frame.env)?;
                        frame.env.bind(name.clone(), v);
                    }
                    None => frame.env.declare(name),
                }
                Ok(Flow::Normal)
            }
            StmtKind::Assign { name, value } => {
                let v = self.int(value, &frame.env)?;
                frame.env.assign(name, v)?;
                Ok(Flow::Normal)
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                if self.bool(cond, &frame.env)? {
                    self.block(then_branch, frame)
                } else if let Some(e) = else_branch {
                    self.block(e, frame)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While { cond, body, .. } => {
                while self.bool(cond, &frame.env)? {
                    self.tick()?;
                    if let Flow::Return(v) = self.block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::Return(e) => {
                let v = self.int(e, &frame.env)?;
                if frame.record {
                    frame.locals = Some(frame.env.snapshot());
                }
                Ok(Flow::Return(v))
            }
            StmtKind::Assert { label, pred } => {
                if frame.record {
                    let holds = self.bool(pred, &frame.env);
                    frame.asserts.push(AssertOutcome {
                        label: label.clone(),
                        holds,
                    });
                }
                Ok(Flow::Normal)
            }
            StmtKind::Block(b) => self.block(b, frame),
        }
    }

    pub fn eval(&self, e: &Expr, env: &Env<S>) -> Result<Value<S>, EvalError> {
        use BinOp::*;
        Ok(match e {
            Expr::Int(n) => Value::Int(S::from_i64(*n).ok_or(EvalError::Overflow)?),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(v) => Value::Int(env.get(v)?),
            Expr::Result => Value::Int(
                env.result
                    .clone()
                    .ok_or_else(|| EvalError::Unbound("\\result".into()))?,
            ),
            Expr::Unary(UnOp::Neg, a) => {
                Value::Int(self.int(a, env)?.checked_negate().ok_or(EvalError::Overflow)?)
            }
            Expr::Unary(UnOp::Not, a) => Value::Bool(!self.bool(a, env)?),
            Expr::Binary(And, a, b) => Value::Bool(self.bool(a, env)? && self.bool(b, env)?),
            Expr::Binary(Or, a, b) => Value::Bool(self.bool(a, env)? || self.bool(b, env)?),
            Expr::Binary(Implies, a, b) => Value::Bool(!self.bool(a, env)? || self.bool(b, env)?),
            Expr::Binary(Iff, a, b) => Value::Bool(self.bool(a, env)? == self.bool(b, env)?),
            Expr::Binary(op @ (Eq | Ne), a, b) => {
                let same = self.eval(a, env)? == self.eval(b, env)?;
                Value::Bool(if *op == Eq { same } else { !same })
            }
            Expr::Binary(op, a, b) => {
                let (x, y) = (self.int(a, env)?, self.int(b, env)?);
                match op {
                    Add => Value::Int(x.checked_add(&y).ok_or(EvalError::Overflow)?),
                    Sub => Value::Int(x.checked_sub(&y).ok_or(EvalError::Overflow)?),
                    Mul => Value::Int(x.checked_mul(&y).ok_or(EvalError::Overflow)?),
                    Div | Rem if y.is_zero() => return Err(EvalError::DivisionByZero),
                    Div => Value::Int(x.checked_div(&y).ok_or(EvalError::Overflow)?),
                    Rem => Value::Int(x.checked_rem_trunc(&y).ok_or(EvalError::Overflow)?),
                    Lt => Value::Bool(x < y),
                    Le => Value::Bool(x <= y),
                    Gt => Value::Bool(x > y),
                    Ge => Value::Bool(x >= y),
                    And | Or | Implies | Iff | Eq | Ne => unreachable!("handled above"),
                }
            }
            Expr::App(f, args) => Value::Int(self.apply(f, args, env)?),
            Expr::Call(c) => Value::Int(self.apply(&c.callee, &c.args, env)?),
            Expr::Quant(q, vars, body) => Value::Bool(self.quantified(*q, vars, body, env)?),
        })
    }

    /// A program function runs its body; `X_acsl` runs `X`.
    fn apply(&self, f: &str, args: &[Expr], env: &Env<S>) -> Result<S, EvalError> {
        let args = args
            .iter()
            .map(|a| self.int(a, env))
            .collect::<Result<Vec<_>, _>>()?;
        let target = if self.program.function(f).is_some() {
            f
        } else {
            match f.strip_suffix(ACSL_SUFFIX) {
                Some(stem) if self.program.function(stem).is_some() => stem,
                _ => return Err(EvalError::Uninterpreted(f.to_string())),
            }
        };
        Ok(self.invoke(target, &args, env.depth + 1, false)?.value)
    }

    fn quantified(&self, q: Quantifier, vars: &[Ident], body: &Expr, env: &Env<S>) -> Result<bool, EvalError> {
        let (lo, hi) = self.config.quant_range;
        let mut inner = env.clone();
        inner.scopes.push(BTreeMap::new());
        let want = q == Quantifier::Forall;
        // Odometer over vars; returns early on a witness (exists) or a
        // counterexample (forall).
        let mut values = vec![lo; vars.len()];
        if lo > hi {
            return Ok(want);
        }
        loop {
            for (v, x) in vars.iter().zip(&values) {
                inner.bind(v.clone(), S::from_i64(*x).ok_or(EvalError::Overflow)?);
            }
            self.tick()?;
            if self.bool(body, &inner)? != want {
                return Ok(!want);
            }
            let mut i = 0;
            loop {
                if i == values.len() {
                    return Ok(want);
                }
                if values[i] < hi {
                    values[i] += 1;
                    break;
                }
                values[i] = lo;
                i += 1;
            }
        }
    }

    pub fn int(&self, e: &Expr, env: &Env<S>) -> Result<S, EvalError> {
        match self.eval(e, env)? {
            Value::Int(v) => Ok(v),
            Value::Bool(_) => Err(EvalError::Type("expected an integer, found a predicate".into())),
        }
    }

    pub fn bool(&self, e: &Expr, env: &Env<S>) -> Result<bool, EvalError> {
        match self.eval(e, env)? {
            Value::Bool(b) => Ok(b),
            Value::Int(_) => Err(EvalError::Type("expected a predicate, found an integer".into())),
        }
    }

    /// Truth value of a closed or `env`-closed predicate. The step budget
    /// is shared by everything the predicate evaluates.
    pub fn eval_predicate(&self, pred: &Expr, env: &Env<S>) -> Result<bool, EvalError> {
        self.steps.set(0);
        self.bool(pred, env)
    }
}

/// `name(args)` under the default configuration.
pub fn eval_function<S: Scalar>(program: &Program, name: &str, args: &[S]) -> Result<S, EvalError> {
    Interp::new(program).call(name, args)
}

/// Truth value of `pred` under `env`, with quantifiers ranging over
/// `quant_range`.
pub fn eval_predicate<S: Scalar>(
    program: &Program,
    pred: &Expr,
    env: &Env<S>,
    quant_range: (i64, i64),
) -> Result<bool, EvalError> {
    let config = InterpConfig {
        quant_range,
        ..InterpConfig::default()
    };
    Interp::with_config(program, config).eval_predicate(pred, env)
}
