//! Abstract syntax of RelC programs and their annotations.
//!
//! Code expressions and logic terms/predicates share the [`Expr`] tree.
//! Which constructs are legal where (quantifiers, `\call`, `\result`,
//! logic applications) is decided by the checker, not by the types.

use crate::diag::Span;

pub type Ident = String;

/// Suffix of the logic counterpart generated for a program function.
pub const ACSL_SUFFIX: &str = "_acsl";
/// Behavior name that hosts the generated bridging postconditions.
pub const BRIDGE_BEHAVIOR: &str = "bridge_acsl";
pub const WRAPPER_PREFIX: &str = "relational_wrapper_";
pub const LEMMA_SUFFIX: &str = "_lemma";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Implies,
    Iff,
}

impl BinOp {
    pub fn is_arith(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem
        )
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Implies | BinOp::Iff)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
            BinOp::Iff => "<==>",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
}

/// `\call(callee, args...)`: the value returned by calling a program function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CallTerm {
    pub callee: Ident,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(Ident),
    /// `\result`
    Result,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `f(args)`: a program call in code, a logic function application in
    /// annotations.
    App(Ident, Vec<Expr>),
    Call(CallTerm),
    Quant(Quantifier, Vec<Ident>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<Ident>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    /// Number of `\call` occurrences, nested ones included.
    pub fn call_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Call(_)) {
                n += 1;
            }
        });
        n
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Result => {}
            Expr::Unary(_, e) | Expr::Quant(_, _, e) => e.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::App(_, args) => args.iter().for_each(|a| a.visit(f)),
            Expr::Call(c) => c.args.iter().for_each(|a| a.visit(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Block { stmts }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            kind,
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl {
        name: Ident,
        init: Option<Expr>,
    },
    Assign {
        name: Ident,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Block,
        else_branch: Option<Block>,
    },
    While {
        cond: Expr,
        invariants: Vec<Expr>,
        body: Block,
    },
    Return(Expr),
    Assert {
        label: Option<Ident>,
        pred: Expr,
    },
    Block(Block),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub pred: Expr,
    pub span: Span,
}

impl Clause {
    pub fn new(pred: Expr) -> Self {
        Clause {
            pred,
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ensures {
    pub pred: Expr,
    /// Named behavior the clause belongs to, `None` for the default one.
    pub behavior: Option<Ident>,
    pub span: Span,
}

impl Ensures {
    pub fn is_bridge(&self) -> bool {
        self.behavior.as_deref() == Some(BRIDGE_BEHAVIOR)
    }
}

/// A property over one or more calls, `\forall binders; body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalProperty {
    pub name: Ident,
    pub binders: Vec<Ident>,
    pub body: Expr,
    pub span: Span,
}

impl RelationalProperty {
    /// The property as a single closed predicate.
    pub fn predicate(&self) -> Expr {
        if self.binders.is_empty() {
            self.body.clone()
        } else {
            Expr::Quant(
                Quantifier::Forall,
                self.binders.clone(),
                Box::new(self.body.clone()),
            )
        }
    }

    /// All call terms in left-to-right, innermost-first order.
    pub fn calls_innermost_first(&self) -> Vec<&CallTerm> {
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a CallTerm>) {
            match e {
                Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Result => {}
                Expr::Unary(_, e) | Expr::Quant(_, _, e) => walk(e, out),
                Expr::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::App(_, args) => args.iter().for_each(|a| walk(a, out)),
                Expr::Call(c) => {
                    c.args.iter().for_each(|a| walk(a, out));
                    out.push(c);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }

    pub fn lemma_name(&self) -> Ident {
        format!("{}{}", self.name, LEMMA_SUFFIX)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Contract {
    pub requires: Vec<Clause>,
    pub ensures: Vec<Ensures>,
    pub assigns_nothing: bool,
    pub relational: Vec<RelationalProperty>,
}

impl Contract {
    pub fn is_empty(&self) -> bool {
        self.requires.is_empty()
            && self.ensures.is_empty()
            && !self.assigns_nothing
            && self.relational.is_empty()
    }

    pub fn has_bridge(&self) -> bool {
        self.ensures.iter().any(Ensures::is_bridge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: Ident,
    pub params: Vec<Ident>,
    /// `None` for a prototype.
    pub body: Option<Block>,
    pub contract: Contract,
    pub span: Span,
}

impl FunctionDef {
    pub fn is_prototype(&self) -> bool {
        self.body.is_none()
    }

    pub fn is_wrapper(&self) -> bool {
        self.name.starts_with(WRAPPER_PREFIX)
    }

    pub fn logic_name(&self) -> Ident {
        logic_name(&self.name)
    }
}

pub fn logic_name(function: &str) -> Ident {
    format!("{function}{ACSL_SUFFIX}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogicDecl {
    /// Uninterpreted `logic int name(int p1, ...)`.
    Function {
        name: Ident,
        params: Vec<Ident>,
        span: Span,
    },
    Lemma {
        name: Ident,
        pred: Expr,
        span: Span,
    },
}

impl LogicDecl {
    pub fn name(&self) -> &str {
        match self {
            LogicDecl::Function { name, .. } | LogicDecl::Lemma { name, .. } => name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            LogicDecl::Function { span, .. } | LogicDecl::Lemma { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    pub logic_decls: Vec<LogicDecl>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn logic_function(&self, name: &str) -> Option<&[Ident]> {
        self.logic_decls.iter().find_map(|d| match d {
            LogicDecl::Function { name: n, params, .. } if n == name => Some(params.as_slice()),
            _ => None,
        })
    }

    pub fn lemma(&self, name: &str) -> Option<&Expr> {
        self.logic_decls.iter().find_map(|d| match d {
            LogicDecl::Lemma { name: n, pred, .. } if n == name => Some(pred),
            _ => None,
        })
    }

    /// Relational properties with their host function, in declaration order.
    pub fn relational_properties(&self) -> impl Iterator<Item = (&FunctionDef, &RelationalProperty)> {
        self.functions
            .iter()
            .flat_map(|f| f.contract.relational.iter().map(move |p| (f, p)))
    }

    /// The relational property a lemma was generated from, if any.
    pub fn lemma_origin(&self, lemma: &str) -> Option<(&FunctionDef, &RelationalProperty)> {
        self.relational_properties()
            .find(|(_, p)| p.lemma_name() == lemma)
    }

    /// Resets every span, so that programs can be compared structurally.
    pub fn strip_spans(&mut self) {
        fn block(b: &mut Block) {
            for s in &mut b.stmts {
                s.span = Span::default();
                match &mut s.kind {
                    StmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        block(then_branch);
                        if let Some(e) = else_branch {
                            block(e);
                        }
                    }
                    StmtKind::While { body, .. } => block(body),
                    StmtKind::Block(b) => block(b),
                    _ => {}
                }
            }
        }
        for f in &mut self.functions {
            f.span = Span::default();
            f.contract.requires.iter_mut().for_each(|c| c.span = Span::default());
            f.contract.ensures.iter_mut().for_each(|c| c.span = Span::default());
            f.contract
                .relational
                .iter_mut()
                .for_each(|c| c.span = Span::default());
            if let Some(b) = &mut f.body {
                block(b);
            }
        }
        for d in &mut self.logic_decls {
            match d {
                LogicDecl::Function { span, .. } | LogicDecl::Lemma { span, .. } => {
                    *span = Span::default()
                }
            }
        }
    }

    /// Every identifier that occurs anywhere in the program.
    pub fn identifiers(&self) -> std::collections::BTreeSet<Ident> {
        let mut out = std::collections::BTreeSet::new();
        let mut expr = |e: &Expr, out: &mut std::collections::BTreeSet<Ident>| {
            e.visit(&mut |e| match e {
                Expr::Var(v) => {
                    out.insert(v.clone());
                }
                Expr::App(f, _) => {
                    out.insert(f.clone());
                }
                Expr::Call(c) => {
                    out.insert(c.callee.clone());
                }
                Expr::Quant(_, vs, _) => out.extend(vs.iter().cloned()),
                _ => {}
            })
        };
        fn block(
            b: &Block,
            out: &mut std::collections::BTreeSet<Ident>,
            expr: &mut impl FnMut(&Expr, &mut std::collections::BTreeSet<Ident>),
        ) {
            for s in &b.stmts {
                match &s.kind {
                    StmtKind::Decl { name, init } => {
                        out.insert(name.clone());
                        if let Some(e) = init {
                            expr(e, out);
                        }
                    }
                    StmtKind::Assign { name, value } => {
                        out.insert(name.clone());
                        expr(value, out);
                    }
                    StmtKind::If {
                        cond,
                        then_branch,
                        else_branch,
                    } => {
                        expr(cond, out);
                        block(then_branch, out, expr);
                        if let Some(e) = else_branch {
                            block(e, out, expr);
                        }
                    }
                    StmtKind::While {
                        cond,
                        invariants,
                        body,
                    } => {
                        expr(cond, out);
                        invariants.iter().for_each(|i| expr(i, out));
                        block(body, out, expr);
                    }
                    StmtKind::Return(e) => expr(e, out),
                    StmtKind::Assert { label, pred } => {
                        out.extend(label.iter().cloned());
                        expr(pred, out);
                    }
                    StmtKind::Block(b) => block(b, out, expr),
                }
            }
        }
        for f in &self.functions {
            out.insert(f.name.clone());
            out.extend(f.params.iter().cloned());
            for c in &f.contract.requires {
                expr(&c.pred, &mut out);
            }
            for c in &f.contract.ensures {
                expr(&c.pred, &mut out);
            }
            for p in &f.contract.relational {
                out.insert(p.name.clone());
                out.extend(p.binders.iter().cloned());
                expr(&p.body, &mut out);
            }
            if let Some(b) = &f.body {
                block(b, &mut out, &mut expr);
            }
        }
        for d in &self.logic_decls {
            match d {
                LogicDecl::Function { name, params, .. } => {
                    out.insert(name.clone());
                    out.extend(params.iter().cloned());
                }
                LogicDecl::Lemma { name, pred, .. } => {
                    out.insert(name.clone());
                    expr(pred, &mut out);
                }
            }
        }
        out
    }
}
