//! Self-composition.
//!
//! For every relational property this produces a wrapper function that
//! inlines each `\call` once and asserts the property over the recorded
//! results, a lemma restating the property over uninterpreted `_acsl`
//! counterparts, and a bridging postcondition on every involved function
//! tying its result to its counterpart. The links between these pieces
//! drive status propagation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ast::*;
use crate::check::CheckedProgram;
use crate::ids::PropertyId;
use crate::logic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    /// Proving the wrapper assert establishes the lemma.
    WrapperAssertProvesLemma,
    /// The bridge clause is an axiom by construction.
    BridgingEnsuresAssumed,
    /// The relational clause holds iff its wrapper assert does.
    PropertyMirrorsAssert,
    /// No wrapper could be built: lemma and clause are axioms.
    LemmaAssumed,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StatusLink {
    pub kind: LinkKind,
    pub source: PropertyId,
    pub target: PropertyId,
}

/// One inlined call inside a wrapper.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallBinding {
    pub callee: Ident,
    /// Over the wrapper parameters and earlier result variables.
    pub args: Vec<Expr>,
    pub result: Ident,
    /// True for calls that feed another call's arguments.
    pub nested: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrapperInfo {
    pub property: Ident,
    pub host: Ident,
    pub wrapper: Ident,
    /// In inlining order. Empty for wrappers that were already present in
    /// the input program.
    pub calls: Vec<CallBinding>,
    pub assert: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformOutput {
    pub program: Program,
    pub links: Vec<StatusLink>,
    pub wrappers: Vec<WrapperInfo>,
}

impl TransformOutput {
    pub fn wrapper_for(&self, property: &str) -> Option<&WrapperInfo> {
        self.wrappers.iter().find(|w| w.property == property)
    }
}

/// Hands out identifiers that do not occur in `used`.
#[derive(Debug, Clone)]
pub struct FreshNamer {
    used: BTreeSet<Ident>,
    counters: BTreeMap<String, usize>,
}

impl FreshNamer {
    pub fn new(used: BTreeSet<Ident>) -> Self {
        FreshNamer {
            used,
            counters: BTreeMap::new(),
        }
    }

    /// `<family><k>` with the per-family counter starting at 1.
    pub fn next(&mut self, family: &str) -> Ident {
        let counter = self.counters.entry(family.to_string()).or_insert(0);
        loop {
            *counter += 1;
            let name = format!("{family}{counter}");
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }

    /// `base` itself if unused, else `base_2`, `base_3`, ...
    pub fn claim(&mut self, base: &str) -> Ident {
        if self.used.insert(base.to_string()) {
            return base.to_string();
        }
        (2..)
            .map(|k| format!("{base}_{k}"))
            .find(|n| self.used.insert(n.clone()))
            .expect("unbounded range")
    }
}

fn local_names(b: &Block, out: &mut Vec<Ident>) {
    for s in &b.stmts {
        match &s.kind {
            StmtKind::Decl { name, .. } => out.push(name.clone()),
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                local_names(then_branch, out);
                if let Some(e) = else_branch {
                    local_names(e, out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => local_names(body, out),
            _ => {}
        }
    }
}

struct Inliner<'p> {
    program: &'p Program,
    namer: FreshNamer,
    stmts: Vec<Stmt>,
    calls: Vec<CallBinding>,
    hoisted: Vec<Clause>,
    nested_pre: Vec<Expr>,
    binders: BTreeSet<Ident>,
}

impl Inliner<'_> {
    fn rewrite(&mut self, e: &Expr, nested: bool) -> Expr {
        match e {
            Expr::Call(c) => {
                let args = c.args.iter().map(|a| self.rewrite(a, true)).collect();
                self.inline(&c.callee, args, nested)
            }
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Result => e.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(self.rewrite(a, nested))),
            Expr::Binary(op, a, b) => {
                let a = self.rewrite(a, nested);
                Expr::binary(*op, a, self.rewrite(b, nested))
            }
            Expr::App(f, args) => {
                Expr::App(f.clone(), args.iter().map(|a| self.rewrite(a, nested)).collect())
            }
            Expr::Quant(q, vs, body) => {
                Expr::Quant(*q, vs.clone(), Box::new(self.rewrite(body, nested)))
            }
        }
    }

    fn inline(&mut self, callee: &str, args: Vec<Expr>, nested: bool) -> Expr {
        let f = self
            .program
            .function(callee)
            .expect("callee resolved by typecheck");
        let body = f.body.as_ref().expect("wrapper callees have bodies");
        let k = self.calls.len() + 1;
        let result = self.namer.next(if nested {
            "local_variable_relational_"
        } else {
            "return_variable_relational_"
        });

        let mut names = f.params.clone();
        local_names(body, &mut names);
        let renaming: BTreeMap<Ident, Ident> = names
            .iter()
            .map(|n| (n.clone(), self.namer.claim(&format!("{n}_rel_{k}"))))
            .collect();

        let mut copy: Vec<Stmt> = f
            .params
            .iter()
            .zip(&args)
            .map(|(p, a)| {
                Stmt::new(StmtKind::Decl {
                    name: renaming[p].clone(),
                    init: Some(a.clone()),
                })
            })
            .collect();
        copy.extend(rename_block(body, &renaming, &result, k).stmts);

        let actuals: BTreeMap<Ident, Expr> =
            f.params.iter().cloned().zip(args.iter().cloned()).collect();
        for r in &f.contract.requires {
            let pre = logic::subst(&r.pred, &actuals);
            // Calls with the same arguments yield the same precondition.
            if logic::free_vars(&pre).is_subset(&self.binders) {
                if !self.hoisted.iter().any(|h| h.pred == pre) {
                    self.hoisted.push(Clause::new(pre));
                }
            } else if !self.nested_pre.contains(&pre) {
                self.nested_pre.push(pre);
            }
        }

        self.stmts.push(Stmt::new(StmtKind::Decl {
            name: result.clone(),
            init: None,
        }));
        self.stmts.push(Stmt::new(StmtKind::Block(Block::new(copy))));
        self.calls.push(CallBinding {
            callee: callee.to_string(),
            args,
            result: result.clone(),
            nested,
        });
        Expr::Var(result)
    }
}

fn rename_expr(e: &Expr, renaming: &BTreeMap<Ident, Ident>) -> Expr {
    let map: BTreeMap<Ident, Expr> = renaming
        .iter()
        .map(|(k, v)| (k.clone(), Expr::Var(v.clone())))
        .collect();
    logic::subst(e, &map)
}

/// Copies a callee body under `renaming`, turning `return e` into an
/// assignment to `result`. Returns are in tail position, so falling
/// through after the assignment is equivalent.
fn rename_block(b: &Block, renaming: &BTreeMap<Ident, Ident>, result: &str, k: usize) -> Block {
    let stmts = b
        .stmts
        .iter()
        .map(|s| {
            let kind = match &s.kind {
                StmtKind::Decl { name, init } => StmtKind::Decl {
                    name: renaming[name].clone(),
                    init: init.as_ref().map(|e| rename_expr(e, renaming)),
                },
                StmtKind::Assign { name, value } => StmtKind::Assign {
                    name: renaming[name].clone(),
                    value: rename_expr(value, renaming),
                },
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => StmtKind::If {
                    cond: rename_expr(cond, renaming),
                    then_branch: rename_block(then_branch, renaming, result, k),
                    else_branch: else_branch
                        .as_ref()
                        .map(|e| rename_block(e, renaming, result, k)),
                },
                StmtKind::While {
                    cond,
                    invariants,
                    body,
                } => StmtKind::While {
                    cond: rename_expr(cond, renaming),
                    invariants: invariants.iter().map(|i| rename_expr(i, renaming)).collect(),
                    body: rename_block(body, renaming, result, k),
                },
                StmtKind::Return(e) => StmtKind::Assign {
                    name: result.to_string(),
                    value: rename_expr(e, renaming),
                },
                StmtKind::Assert { label, pred } => StmtKind::Assert {
                    label: label.as_ref().map(|l| format!("{l}_rel_{k}")),
                    pred: rename_expr(pred, renaming),
                },
                StmtKind::Block(b) => StmtKind::Block(rename_block(b, renaming, result, k)),
            };
            Stmt::new(kind)
        })
        .collect();
    Block::new(stmts)
}

/// Builds the wrapper of `prop`. Every direct callee must have a body;
/// calls inside inlined bodies stay calls.
pub fn make_wrapper(
    prop: &RelationalProperty,
    host: &str,
    program: &Program,
    namer: &mut FreshNamer,
) -> (FunctionDef, WrapperInfo) {
    let mut inliner = Inliner {
        program,
        namer: FreshNamer::new(program.identifiers()),
        stmts: Vec::new(),
        calls: Vec::new(),
        hoisted: Vec::new(),
        nested_pre: Vec::new(),
        binders: prop.binders.iter().cloned().collect(),
    };
    let body = inliner.rewrite(&prop.body, false);
    // Preconditions of nested calls depend on earlier results, so they
    // cannot be wrapper requires; they guard the assertion instead.
    let assert = if inliner.nested_pre.is_empty() {
        body
    } else {
        Expr::binary(
            BinOp::Implies,
            logic::conj(inliner.nested_pre.drain(..)),
            body,
        )
    };
    let mut stmts = std::mem::take(&mut inliner.stmts);
    stmts.push(Stmt::new(StmtKind::Assert {
        label: Some(prop.name.clone()),
        pred: assert.clone(),
    }));
    stmts.push(Stmt::new(StmtKind::Return(Expr::Int(0))));
    let name = namer.next(WRAPPER_PREFIX);
    let wrapper = FunctionDef {
        name: name.clone(),
        params: prop.binders.clone(),
        body: Some(Block::new(stmts)),
        contract: Contract {
            requires: inliner.hoisted,
            ensures: Vec::new(),
            assigns_nothing: true,
            relational: Vec::new(),
        },
        span: Default::default(),
    };
    let info = WrapperInfo {
        property: prop.name.clone(),
        host: host.to_string(),
        wrapper: name,
        calls: inliner.calls,
        assert,
    };
    (wrapper, info)
}

/// Logic counterparts for callees not yet in `declared`, then the lemma.
/// Callee preconditions, instantiated over the counterparts, become the
/// lemma's premise.
pub fn make_axiomatics(
    prop: &RelationalProperty,
    program: &Program,
    declared: &mut BTreeSet<Ident>,
) -> Vec<LogicDecl> {
    let mut out = Vec::new();
    let mut premise = Vec::new();
    for call in prop.calls_innermost_first() {
        let Some(f) = program.function(&call.callee) else {
            continue;
        };
        let name = f.logic_name();
        if declared.insert(name.clone()) {
            out.push(LogicDecl::Function {
                name,
                params: f.params.clone(),
                span: Default::default(),
            });
        }
        let actuals: BTreeMap<Ident, Expr> = f
            .params
            .iter()
            .cloned()
            .zip(call.args.iter().map(logic::calls_to_logic))
            .collect();
        for r in &f.contract.requires {
            premise.push(logic::subst(&r.pred, &actuals));
        }
    }
    let body = logic::calls_to_logic(&prop.body);
    let body = if premise.is_empty() {
        body
    } else {
        Expr::binary(BinOp::Implies, logic::conj(premise), body)
    };
    let pred = if prop.binders.is_empty() {
        body
    } else {
        Expr::Quant(Quantifier::Forall, prop.binders.clone(), Box::new(body))
    };
    out.push(LogicDecl::Lemma {
        name: prop.lemma_name(),
        pred,
        span: Default::default(),
    });
    out
}

/// `ensures \result == f_acsl(params);` in the bridge behavior, or `None`
/// when `f` already has one.
pub fn make_bridge(f: &FunctionDef) -> Option<Ensures> {
    if f.contract.has_bridge() {
        return None;
    }
    let args = f.params.iter().map(Expr::var).collect();
    Some(Ensures {
        pred: Expr::binary(BinOp::Eq, Expr::Result, Expr::App(f.logic_name(), args)),
        behavior: Some(BRIDGE_BEHAVIOR.to_string()),
        span: Default::default(),
    })
}

/// A wrapper already present in `program` for the property named `prop`.
fn existing_wrapper<'p>(program: &'p Program, prop: &str) -> Option<(&'p FunctionDef, Expr)> {
    program.functions.iter().filter(|f| f.is_wrapper()).find_map(|f| {
        f.body.as_ref()?.stmts.iter().find_map(|s| match &s.kind {
            StmtKind::Assert {
                label: Some(l),
                pred,
            } if l == prop => Some((f, pred.clone())),
            _ => None,
        })
    })
}

pub fn transform(checked: &CheckedProgram) -> TransformOutput {
    let input = checked.program();
    let mut program = input.clone();
    let mut declared: BTreeSet<Ident> = input
        .logic_decls
        .iter()
        .filter(|d| matches!(d, LogicDecl::Function { .. }))
        .map(|d| d.name().to_string())
        .collect();
    let mut wrapper_namer = FreshNamer::new(input.identifiers());
    let mut new_functions = Vec::new();
    let mut new_logic = Vec::new();
    let mut new_lemmas = Vec::new();
    let mut links = Vec::new();
    let mut wrappers = Vec::new();
    // Direct callees in order of first involvement, with the first property.
    let mut involved: Vec<(Ident, PropertyId)> = Vec::new();

    for (host, prop) in input.relational_properties() {
        let clause = PropertyId::relational(&host.name, &prop.name);
        for call in prop.calls_innermost_first() {
            if !involved.iter().any(|(f, _)| *f == call.callee) {
                involved.push((call.callee.clone(), clause.clone()));
            }
        }
        for d in make_axiomatics(prop, input, &mut declared) {
            match d {
                LogicDecl::Lemma { ref name, .. } if input.lemma(name).is_some() => {}
                LogicDecl::Lemma { .. } => new_lemmas.push(d),
                LogicDecl::Function { .. } => new_logic.push(d),
            }
        }
        let lemma = PropertyId::lemma(&prop.lemma_name());

        let wrapper = if let Some((f, assert)) = existing_wrapper(input, &prop.name) {
            Some(WrapperInfo {
                property: prop.name.clone(),
                host: host.name.clone(),
                wrapper: f.name.clone(),
                calls: Vec::new(),
                assert,
            })
        } else {
            let inlinable = prop
                .calls_innermost_first()
                .iter()
                .all(|c| input.function(&c.callee).is_some_and(|f| f.body.is_some()));
            inlinable.then(|| {
                let (f, info) = make_wrapper(prop, &host.name, input, &mut wrapper_namer);
                new_functions.push(f);
                info
            })
        };
        match wrapper {
            Some(info) => {
                let assert = PropertyId::wrapper_assert(&info.wrapper);
                links.push(StatusLink {
                    kind: LinkKind::PropertyMirrorsAssert,
                    source: clause.clone(),
                    target: assert.clone(),
                });
                links.push(StatusLink {
                    kind: LinkKind::WrapperAssertProvesLemma,
                    source: assert,
                    target: lemma,
                });
                wrappers.push(info);
            }
            None => links.push(StatusLink {
                kind: LinkKind::LemmaAssumed,
                source: clause,
                target: lemma,
            }),
        }
    }

    for (name, first) in &involved {
        let f = program
            .functions
            .iter_mut()
            .find(|f| f.name == *name)
            .expect("callee resolved by typecheck");
        if let Some(bridge) = make_bridge(f) {
            f.contract.ensures.push(bridge);
        }
        links.push(StatusLink {
            kind: LinkKind::BridgingEnsuresAssumed,
            source: first.clone(),
            target: PropertyId::bridge(name),
        });
    }

    // User declarations keep their place; generated functions precede
    // generated lemmas.
    let split = program
        .logic_decls
        .iter()
        .position(|d| matches!(d, LogicDecl::Lemma { .. }))
        .unwrap_or(program.logic_decls.len());
    program.logic_decls.splice(split..split, new_logic);
    program.logic_decls.extend(new_lemmas);
    program.functions.extend(new_functions);

    TransformOutput {
        program,
        links,
        wrappers,
    }
}
