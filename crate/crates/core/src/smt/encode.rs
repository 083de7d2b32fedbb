use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::ast::{BinOp, Expr, Quantifier, UnOp};
use crate::logic;
use crate::vcgen::VerificationCondition;

/// A rendered refutation query for one VC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub logic: String,
    /// `declare-fun`/`declare-const` commands in script order.
    pub declarations: Vec<String>,
    /// Hypotheses first, the negated goal last.
    pub assertions: Vec<String>,
    pub text: String,
    /// SMT symbol of each goal variable declared as a constant, mapped
    /// back to its VC name.
    pub constants: BTreeMap<String, String>,
}

// Truncating division and remainder, as in C. Helper names contain `$`, which
// RelC identifiers cannot.
const PRELUDE: &str = "\
(define-fun relc$div ((a Int) (b Int)) Int (ite (>= a 0) (div a b) (- (div (- a) b))))
(define-fun relc$mod ((a Int) (b Int)) Int (- a (* b (relc$div a b))))
";

/// Names that cannot be declared: SMT-LIB reserved words and the symbols
/// of the core and integer theories.
const RESERVED: &[&str] = &[
    "_", "!", "as", "let", "exists", "forall", "match", "par", "NUMERAL", "DECIMAL", "STRING",
    "BINARY", "HEXADECIMAL", "true", "false", "not", "and", "or", "xor", "ite", "distinct",
    "div", "mod", "abs", "Int", "Bool", "Real", "to_real", "to_int", "is_int", "assert",
    "check-sat", "declare-fun", "declare-const", "define-fun", "push", "pop", "exit",
];

fn is_simple_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || "~!@$%^&*_-+=<>.?/".contains(c) => {}
        _ => return false,
    }
    s.chars()
        .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
}

/// SMT symbol for a VC identifier. Clashing names move into a `$`
/// namespace that program identifiers cannot reach.
pub fn symbol(name: &str) -> String {
    if RESERVED.contains(&name) || name.starts_with("relc$") {
        format!("v${name}")
    } else if is_simple_symbol(name) {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

pub fn term(e: &Expr) -> String {
    let mut out = String::new();
    write_term(&mut out, e);
    out
}

fn write_term(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(n) if *n < 0 => write!(out, "(- {})", (*n as i128).unsigned_abs()).unwrap(),
        Expr::Int(n) => write!(out, "{n}").unwrap(),
        Expr::Bool(b) => write!(out, "{b}").unwrap(),
        Expr::Var(v) => out.push_str(&symbol(v)),
        Expr::Result => {
            debug_assert!(false, "\\result reached the encoder");
            out.push_str("result$")
        }
        Expr::Unary(op, a) => {
            out.push_str(match op {
                UnOp::Neg => "(- ",
                UnOp::Not => "(not ",
            });
            write_term(out, a);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            let head = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "relc$div",
                BinOp::Rem => "relc$mod",
                BinOp::Lt => "<",
                BinOp::Le => "<=",
                BinOp::Gt => ">",
                BinOp::Ge => ">=",
                BinOp::Eq | BinOp::Iff => "=",
                BinOp::Ne => "distinct",
                BinOp::And => "and",
                BinOp::Or => "or",
                BinOp::Implies => "=>",
            };
            write!(out, "({head} ").unwrap();
            write_term(out, a);
            out.push(' ');
            write_term(out, b);
            out.push(')');
        }
        Expr::App(f, args) if args.is_empty() => out.push_str(&symbol(f)),
        Expr::App(f, args) => {
            write!(out, "({}", symbol(f)).unwrap();
            for a in args {
                out.push(' ');
                write_term(out, a);
            }
            out.push(')');
        }
        Expr::Call(_) => {
            debug_assert!(false, "\\call reached the encoder");
            write_term(out, &logic::calls_to_logic(e));
        }
        Expr::Quant(q, vs, body) => {
            out.push_str(match q {
                Quantifier::Forall => "(forall (",
                Quantifier::Exists => "(exists (",
            });
            for (i, v) in vs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "({} Int)", symbol(v)).unwrap();
            }
            out.push_str(") ");
            write_term(out, body);
            out.push(')');
        }
    }
}

fn function_arities(e: &Expr, out: &mut BTreeMap<String, usize>) {
    e.visit(&mut |e| {
        if let Expr::App(f, args) = e {
            out.entry(f.clone()).or_insert(args.len());
        }
    });
}

/// Hypotheses are asserted as they are. The goal's outer universal
/// binders become constants and its body is asserted negated, so that a
/// `sat` answer comes with a model for them.
pub fn encode(vc: &VerificationCondition) -> SmtScript {
    let mut arities = BTreeMap::new();
    function_arities(&vc.goal, &mut arities);
    for (_, h) in &vc.hypotheses {
        function_arities(h, &mut arities);
    }

    let mut body = vc.goal.clone();
    let mut consts: Vec<String> = Vec::new();
    let mut taken: BTreeSet<String> = arities.keys().cloned().collect();
    while let Expr::Quant(Quantifier::Forall, vs, inner) = body {
        let mut inner = *inner;
        for v in vs {
            let name = if taken.contains(&v) {
                let mut avoid = taken.clone();
                avoid.extend(logic::all_vars(&inner));
                let fresh = logic::fresh_name(&v, &avoid);
                inner = logic::subst1(&inner, &v, &Expr::Var(fresh.clone()));
                fresh
            } else {
                v
            };
            taken.insert(name.clone());
            consts.push(name);
        }
        body = inner;
    }

    let mut declarations = Vec::new();
    for (f, n) in &arities {
        let sorts = vec!["Int"; *n].join(" ");
        declarations.push(format!("(declare-fun {} ({sorts}) Int)", symbol(f)));
    }
    let mut constants = BTreeMap::new();
    for c in &consts {
        let sym = symbol(c);
        declarations.push(format!("(declare-const {sym} Int)"));
        constants.insert(sym.trim_matches('|').to_string(), c.clone());
    }

    let mut assertions = Vec::new();
    let mut text = String::new();
    writeln!(text, "; relprove vc {}", vc.id).unwrap();
    text.push_str("; (get-model) is sent by the driver only after a sat answer\n");
    text.push_str("(set-option :produce-models true)\n(set-logic UFNIA)\n");
    text.push_str(PRELUDE);
    for d in declarations.iter().take(arities.len()) {
        writeln!(text, "{d}").unwrap();
    }
    for (id, h) in &vc.hypotheses {
        let a = format!("(assert {})", term(h));
        writeln!(text, "; hypothesis {id}\n{a}").unwrap();
        assertions.push(a);
    }
    for d in declarations.iter().skip(arities.len()) {
        writeln!(text, "{d}").unwrap();
    }
    let goal = format!("(assert (not {}))", term(&body));
    writeln!(text, "{goal}").unwrap();
    assertions.push(goal);
    text.push_str("(check-sat)\n");

    SmtScript {
        logic: "UFNIA".into(),
        declarations,
        assertions,
        text,
        constants,
    }
}
