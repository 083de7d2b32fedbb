//! Operations on logic formulas: free variables, capture-avoiding
//! substitution, and simplifying constructors.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{BinOp, CallTerm, Expr, Ident, Quantifier, UnOp};

pub fn free_vars(e: &Expr) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut Vec::new(), &mut out);
    out
}

fn collect_free(e: &Expr, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
    match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Result => {}
        Expr::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        Expr::Unary(_, e) => collect_free(e, bound, out),
        Expr::Binary(_, a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Expr::App(_, args) => args.iter().for_each(|a| collect_free(a, bound, out)),
        Expr::Call(c) => c.args.iter().for_each(|a| collect_free(a, bound, out)),
        Expr::Quant(_, vs, body) => {
            let n = bound.len();
            bound.extend(vs.iter().cloned());
            collect_free(body, bound, out);
            bound.truncate(n);
        }
    }
}

/// Every variable name occurring in `e`, bound or free.
pub fn all_vars(e: &Expr) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    e.visit(&mut |e| match e {
        Expr::Var(v) => {
            out.insert(v.clone());
        }
        Expr::Quant(_, vs, _) => out.extend(vs.iter().cloned()),
        _ => {}
    });
    out
}

/// Names of applied logic functions.
pub fn applied_functions(e: &Expr) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    e.visit(&mut |e| {
        if let Expr::App(f, _) = e {
            out.insert(f.clone());
        }
    });
    out
}

/// `base$k` for the smallest `k >= 1` with the name not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Ident>) -> Ident {
    let stem = base.split('$').next().unwrap_or(base);
    (1..)
        .map(|k| format!("{stem}${k}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded range")
}

/// Simultaneous capture-avoiding substitution of free variables.
pub fn subst(e: &Expr, map: &BTreeMap<Ident, Expr>) -> Expr {
    if map.is_empty() {
        return e.clone();
    }
    match e {
        Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| e.clone()),
        Expr::Int(_) | Expr::Bool(_) | Expr::Result => e.clone(),
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(subst(a, map))),
        Expr::Binary(op, a, b) => Expr::binary(*op, subst(a, map), subst(b, map)),
        Expr::App(f, args) => Expr::App(f.clone(), args.iter().map(|a| subst(a, map)).collect()),
        Expr::Call(c) => Expr::Call(CallTerm {
            callee: c.callee.clone(),
            args: c.args.iter().map(|a| subst(a, map)).collect(),
        }),
        Expr::Quant(q, vs, body) => {
            let mut inner: BTreeMap<Ident, Expr> = map
                .iter()
                .filter(|(k, _)| !vs.contains(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if inner.is_empty() {
                return e.clone();
            }
            let body_free = free_vars(body);
            inner.retain(|k, _| body_free.contains(k));
            if inner.is_empty() {
                return e.clone();
            }
            let incoming: BTreeSet<Ident> = inner.values().flat_map(free_vars).collect();
            let mut avoid: BTreeSet<Ident> = incoming.clone();
            avoid.extend(all_vars(body));
            avoid.extend(inner.keys().cloned());
            let mut renamed = Vec::with_capacity(vs.len());
            for v in vs {
                if incoming.contains(v) {
                    let fresh = fresh_name(v, &avoid);
                    avoid.insert(fresh.clone());
                    inner.insert(v.clone(), Expr::Var(fresh.clone()));
                    renamed.push(fresh);
                } else {
                    renamed.push(v.clone());
                }
            }
            Expr::Quant(*q, renamed, Box::new(subst(body, &inner)))
        }
    }
}

pub fn subst1(e: &Expr, var: &str, value: &Expr) -> Expr {
    subst(e, &BTreeMap::from([(var.to_string(), value.clone())]))
}

/// Replaces `\result`. The replacement must not mention quantified
/// variables of `e`; callers pass fresh names or program variables.
pub fn subst_result(e: &Expr, value: &Expr) -> Expr {
    map_bottom_up(e, &mut |e| match e {
        Expr::Result => value.clone(),
        other => other,
    })
}

/// Rebuilds `e` applying `f` to every node after its children.
pub fn map_bottom_up(e: &Expr, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
    let rebuilt = match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Result => e.clone(),
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(map_bottom_up(a, f))),
        Expr::Binary(op, a, b) => Expr::binary(*op, map_bottom_up(a, f), map_bottom_up(b, f)),
        Expr::App(g, args) => Expr::App(g.clone(), args.iter().map(|a| map_bottom_up(a, f)).collect()),
        Expr::Call(c) => Expr::Call(CallTerm {
            callee: c.callee.clone(),
            args: c.args.iter().map(|a| map_bottom_up(a, f)).collect(),
        }),
        Expr::Quant(q, vs, body) => Expr::Quant(*q, vs.clone(), Box::new(map_bottom_up(body, f))),
    };
    f(rebuilt)
}

pub fn and(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Bool(true), x) | (x, Expr::Bool(true)) => x,
        (Expr::Bool(false), _) | (_, Expr::Bool(false)) => Expr::Bool(false),
        (a, b) => Expr::binary(BinOp::And, a, b),
    }
}

pub fn or(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Bool(false), x) | (x, Expr::Bool(false)) => x,
        (Expr::Bool(true), _) | (_, Expr::Bool(true)) => Expr::Bool(true),
        (a, b) => Expr::binary(BinOp::Or, a, b),
    }
}

pub fn implies(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Bool(true), x) => x,
        (Expr::Bool(false), _) | (_, Expr::Bool(true)) => Expr::Bool(true),
        (a, b) => Expr::binary(BinOp::Implies, a, b),
    }
}

pub fn not(a: Expr) -> Expr {
    match a {
        Expr::Bool(b) => Expr::Bool(!b),
        Expr::Unary(UnOp::Not, inner) => *inner,
        a => Expr::not(a),
    }
}

/// Conjunction of all items; `\true` when empty.
pub fn conj(items: impl IntoIterator<Item = Expr>) -> Expr {
    let mut items: Vec<Expr> = items.into_iter().collect();
    let Some(last) = items.pop() else {
        return Expr::Bool(true);
    };
    items.into_iter().rev().fold(last, |acc, e| and(e, acc))
}

/// `\forall vars; body`, keeping only binders that occur free in `body`.
pub fn forall(vars: impl IntoIterator<Item = Ident>, body: Expr) -> Expr {
    if matches!(body, Expr::Bool(_)) {
        return body;
    }
    let free = free_vars(&body);
    let mut kept: Vec<Ident> = Vec::new();
    for v in vars {
        if free.contains(&v) && !kept.contains(&v) {
            kept.push(v);
        }
    }
    if kept.is_empty() {
        return body;
    }
    match body {
        // Merge directly nested universals.
        Expr::Quant(Quantifier::Forall, inner, b) => {
            let extra: Vec<Ident> = inner.into_iter().filter(|v| !kept.contains(v)).collect();
            kept.extend(extra);
            Expr::Quant(Quantifier::Forall, kept, b)
        }
        body => Expr::Quant(Quantifier::Forall, kept, Box::new(body)),
    }
}

/// Rewrites every `\call(f, args)` into the logic application `f_acsl(args)`.
pub fn calls_to_logic(e: &Expr) -> Expr {
    map_bottom_up(e, &mut |e| match e {
        Expr::Call(c) => Expr::App(crate::ast::logic_name(&c.callee), c.args),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn substitution_avoids_capture() {
        // (\forall y; x < y)[x := y + 1]  must not capture y
        let e = Expr::Quant(
            Quantifier::Forall,
            vec!["y".into()],
            Box::new(Expr::binary(BinOp::Lt, v("x"), v("y"))),
        );
        let r = subst1(&e, "x", &Expr::binary(BinOp::Add, v("y"), Expr::Int(1)));
        let Expr::Quant(_, vs, body) = &r else { panic!() };
        assert_eq!(vs, &vec!["y$1".to_string()]);
        assert_eq!(
            **body,
            Expr::binary(
                BinOp::Lt,
                Expr::binary(BinOp::Add, v("y"), Expr::Int(1)),
                v("y$1")
            )
        );
        assert_eq!(free_vars(&r), BTreeSet::from(["y".to_string()]));
    }

    #[test]
    fn bound_variables_are_not_substituted() {
        let e = Expr::Quant(Quantifier::Exists, vec!["x".into()], Box::new(v("x")));
        assert_eq!(subst1(&e, "x", &Expr::Int(3)), e);
    }

    #[test]
    fn smart_constructors_simplify() {
        assert_eq!(and(Expr::Bool(true), v("p")), v("p"));
        assert_eq!(implies(v("p"), Expr::Bool(true)), Expr::Bool(true));
        assert_eq!(forall(["x".to_string()], Expr::Bool(true)), Expr::Bool(true));
        assert_eq!(forall(["z".to_string()], v("x")), v("x"));
        assert_eq!(conj(vec![]), Expr::Bool(true));
        assert_eq!(not(not(v("p"))), v("p"));
    }

    #[test]
    fn calls_become_logic_applications() {
        let e = Expr::Call(CallTerm {
            callee: "Decrypt".into(),
            args: vec![
                Expr::Call(CallTerm {
                    callee: "Encrypt".into(),
                    args: vec![v("m"), v("k")],
                }),
                v("k"),
            ],
        });
        assert_eq!(
            calls_to_logic(&e),
            Expr::App(
                "Decrypt_acsl".into(),
                vec![Expr::App("Encrypt_acsl".into(), vec![v("m"), v("k")]), v("k")]
            )
        );
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3i64..3).prop_map(Expr::Int),
            prop::sample::select(vec!["a", "b", "c"]).prop_map(Expr::var),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::binary(BinOp::Add, a, b)),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::binary(BinOp::Lt, a, b)),
                (prop::sample::select(vec!["a", "b"]), inner)
                    .prop_map(|(x, b)| Expr::Quant(Quantifier::Forall, vec![x.to_string()], Box::new(b))),
            ]
        })
    }

    proptest! {
        /// Substituting a term whose variables are all free never changes
        /// the free variables except for the replaced one.
        #[test]
        fn substitution_free_variables(e in arb_expr(), r in arb_expr()) {
            let before = free_vars(&e);
            let out = subst1(&e, "a", &r);
            let mut expected: BTreeSet<Ident> = before.iter().filter(|x| *x != "a").cloned().collect();
            if before.contains("a") {
                expected.extend(free_vars(&r));
            }
            prop_assert_eq!(free_vars(&out), expected);
        }
    }
}
