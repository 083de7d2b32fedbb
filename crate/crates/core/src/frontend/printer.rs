use std::fmt::Write;

use crate::ast::*;

/// Binding strength, loosest first. Operands print parenthesized when they
/// bind looser than their context requires.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Quant(..) => 0,
        Expr::Binary(op, ..) => match op {
            BinOp::Iff => 1,
            BinOp::Implies => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 7,
        },
        Expr::Unary(..) => 8,
        // Negative literals print with a leading minus.
        Expr::Int(n) if *n < 0 => 8,
        _ => 9,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let prec = precedence(e);
    let paren = prec < min_prec;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Int(n) => write!(out, "{n}").unwrap(),
        Expr::Bool(true) => out.push_str("\\true"),
        Expr::Bool(false) => out.push_str("\\false"),
        Expr::Var(v) => out.push_str(v),
        Expr::Result => out.push_str("\\result"),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            // `-(5)` must not collapse into the literal `-5`.
            let force = *op == UnOp::Neg && matches!(inner.as_ref(), Expr::Int(n) if *n >= 0);
            if force {
                out.push('(');
                write_expr(out, inner, 0);
                out.push(')');
            } else {
                write_expr(out, inner, 8);
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            // Left-associative operators bind the right operand one level
            // tighter; implication is right-associative; comparisons never
            // chain (the parser would turn a chain into a conjunction).
            let (lp, rp) = match op {
                BinOp::Implies => (prec + 1, prec),
                _ if op.is_comparison() => (prec + 1, prec + 1),
                _ => (prec, prec + 1),
            };
            write_expr(out, lhs, lp);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, rhs, rp);
        }
        Expr::App(f, args) => {
            out.push_str(f);
            out.push('(');
            write_args(out, args);
            out.push(')');
        }
        Expr::Call(c) => {
            out.push_str("\\call(");
            out.push_str(&c.callee);
            if !c.args.is_empty() {
                out.push_str(", ");
                write_args(out, &c.args);
            }
            out.push(')');
        }
        Expr::Quant(q, vars, body) => {
            out.push_str(match q {
                Quantifier::Forall => "\\forall int ",
                Quantifier::Exists => "\\exists int ",
            });
            out.push_str(&vars.join(", "));
            out.push_str("; ");
            write_expr(out, body, 0);
        }
    }
    if paren {
        out.push(')');
    }
}

fn write_args(out: &mut String, args: &[Expr]) {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a, 0);
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn contract(&mut self, c: &Contract) {
        if c.is_empty() {
            return;
        }
        self.line("/*@");
        self.indent += 1;
        for r in &c.requires {
            self.line(&format!("requires {};", print_expr(&r.pred)));
        }
        for e in c.ensures.iter().filter(|e| e.behavior.is_none()) {
            self.line(&format!("ensures {};", print_expr(&e.pred)));
        }
        if c.assigns_nothing {
            self.line("assigns \\nothing;");
        }
        for r in &c.relational {
            self.line(&format!(
                "relational {}: {};",
                r.name,
                print_expr(&r.predicate())
            ));
        }
        let mut behaviors: Vec<&Ident> = Vec::new();
        for e in &c.ensures {
            if let Some(b) = &e.behavior {
                if !behaviors.contains(&b) {
                    behaviors.push(b);
                }
            }
        }
        for b in behaviors {
            self.line(&format!("behavior {b}:"));
            self.indent += 1;
            for e in c.ensures.iter().filter(|e| e.behavior.as_ref() == Some(b)) {
                self.line(&format!("ensures {};", print_expr(&e.pred)));
            }
            self.indent -= 1;
        }
        self.indent -= 1;
        self.line("*/");
    }

    fn function(&mut self, f: &FunctionDef) {
        self.contract(&f.contract);
        let params: Vec<String> = f.params.iter().map(|p| format!("int {p}")).collect();
        let head = format!("int {}({})", f.name, params.join(", "));
        match &f.body {
            None => self.line(&format!("{head};")),
            Some(b) => {
                self.line(&format!("{head} {{"));
                self.block_contents(b);
                self.line("}");
            }
        }
    }

    fn block_contents(&mut self, b: &Block) {
        self.indent += 1;
        for s in &b.stmts {
            self.stmt(s);
        }
        self.indent -= 1;
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl { name, init: None } => self.line(&format!("int {name};")),
            StmtKind::Decl {
                name,
                init: Some(e),
            } => self.line(&format!("int {name} = {};", print_expr(e))),
            StmtKind::Assign { name, value } => {
                self.line(&format!("{name} = {};", print_expr(value)))
            }
            StmtKind::Return(e) => self.line(&format!("return {};", print_expr(e))),
            StmtKind::Assert { label, pred } => {
                let label = label.as_ref().map_or(String::new(), |l| format!("{l}: "));
                self.line(&format!("/*@ assert {label}{}; */", print_expr(pred)));
            }
            StmtKind::Block(b) => {
                self.line("{");
                self.block_contents(b);
                self.line("}");
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.line(&format!("if ({}) {{", print_expr(cond)));
                self.block_contents(then_branch);
                let mut tail = else_branch.as_ref();
                while let Some(e) = tail {
                    // `else if` chains stay flat.
                    if let [Stmt {
                        kind:
                            StmtKind::If {
                                cond,
                                then_branch,
                                else_branch,
                            },
                        ..
                    }] = e.stmts.as_slice()
                    {
                        self.line(&format!("}} else if ({}) {{", print_expr(cond)));
                        self.block_contents(then_branch);
                        tail = else_branch.as_ref();
                    } else {
                        self.line("} else {");
                        self.block_contents(e);
                        tail = None;
                    }
                }
                self.line("}");
            }
            StmtKind::While {
                cond,
                invariants,
                body,
            } => {
                if !invariants.is_empty() {
                    self.line("/*@");
                    self.indent += 1;
                    for i in invariants {
                        self.line(&format!("loop invariant {};", print_expr(i)));
                    }
                    self.indent -= 1;
                    self.line("*/");
                }
                self.line(&format!("while ({}) {{", print_expr(cond)));
                self.block_contents(body);
                self.line("}");
            }
        }
    }

    fn logic_decls(&mut self, decls: &[LogicDecl]) {
        if decls.is_empty() {
            return;
        }
        self.line("/*@");
        self.indent += 1;
        self.line("axiomatic Relational_axiom {");
        self.indent += 1;
        for d in decls {
            match d {
                LogicDecl::Function { name, params, .. } => {
                    let ps: Vec<String> = params.iter().map(|p| format!("int {p}")).collect();
                    self.line(&format!("logic int {name}({});", ps.join(", ")));
                }
                LogicDecl::Lemma { name, pred, .. } => {
                    self.line(&format!("lemma {name}: {};", print_expr(pred)));
                }
            }
        }
        self.indent -= 1;
        self.line("}");
        self.indent -= 1;
        self.line("*/");
    }
}

/// Renders a program as RelC source: axiomatic block first, then functions in
/// order, separated by blank lines, two-space indentation.
pub fn print(program: &Program) -> String {
    let mut p = Printer {
        out: String::new(),
        indent: 0,
    };
    p.logic_decls(&program.logic_decls);
    for f in &program.functions {
        if !p.out.is_empty() {
            p.out.push('\n');
        }
        p.function(f);
    }
    p.out
}
