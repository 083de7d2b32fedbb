//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Each criterion returns
//! `Err` with a reason on failure; the process exits nonzero if any fail.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use relprove_core::ast::{BinOp, Expr, UnOp};
use relprove_core::diag::Span;
use relprove_core::frontend::{parse_bytes, print, SourceFile};
use relprove_core::ids::PropertyId;
use relprove_core::interp::{differential, eval_predicate, OracleConfig};
use relprove_core::logic::{conj, forall, implies};
use relprove_core::pipeline::{self, ProveConfig, ProveRun};
use relprove_core::smt::{discover_solver, encode, run_solver, SolverConfig, SolverVerdict, VerdictKind};
use relprove_core::status::StatusDb;
use relprove_core::transform::{transform, LinkKind, StatusLink};
use relprove_core::vcgen::{obligations, VcKind, VerificationCondition};
use relprove_core::{ExactEnv, ExactInterp};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn program(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/programs").join(name)
}

const PROGRAMS: [&str; 5] = ["monotonic.relc", "lemma_use.relc", "crypto.relc", "loops.relc", "antitone.relc"];

fn solver() -> Result<SolverConfig, String> {
    discover_solver(None).map(SolverConfig::new)
}

fn prove_text(text: &str) -> Result<ProveRun, String> {
    let checked = pipeline::check(&SourceFile::new("input.relc", text)).map_err(|d| format!("{d:?}"))?;
    pipeline::prove(&checked, &ProveConfig::new(solver()?)).map_err(|e| e.to_string())
}

fn prove_file(name: &str) -> Result<ProveRun, String> {
    prove_text(&fs::read_to_string(program(name)).map_err(|e| e.to_string())?)
}

fn status_name(run: &ProveRun, id: &str) -> String {
    run.db
        .status(&PropertyId::from(id))
        .map_or_else(|| "absent".to_string(), |s| s.name().to_string())
}

/// Runs the binary's `prove --format json`; returns exit code and rows.
fn cli_prove(file: &Path, out: &Path) -> Result<(i32, Vec<Value>, Duration), String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_relprove"))
        .args(["prove", "--format", "json", "-o"])
        .arg(out)
        .arg(file)
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let code = o.status.code().ok_or("killed by a signal")?;
    let rows: Value = serde_json::from_slice(&o.stdout)
        .map_err(|e| format!("bad JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))?;
    Ok((code, rows.as_array().cloned().unwrap_or_default(), took))
}

// ---------------------------------------------------------------------
// 1. Monotonicity example: everything ends valid or proven.

fn criterion_1() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (code, rows, took) = cli_prove(&program("monotonic.relc"), dir.path())?;
    ensure(code == 0, || format!("exit {code}"))?;
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    let status = |id: &str| {
        rows.iter()
            .find(|r| r["id"] == id)
            .and_then(|r| r["status"].as_str())
            .unwrap_or("absent")
            .to_string()
    };
    for k in 1..=3 {
        let a = format!("relational_wrapper_{k}::assert");
        ensure(status(&a) == "proven", || format!("{a} is {}", status(&a)))?;
        let l = format!("lemma::R{k}_lemma");
        ensure(status(&l) == "valid", || format!("{l} is {}", status(&l)))?;
    }
    for r in &rows {
        let s = r["status"].as_str().unwrap_or("");
        ensure(["valid", "proven", "assumed_valid"].contains(&s), || format!("{r}"))?;
    }
    Ok(format!("{} properties green in {:.2}s", rows.len(), took.as_secs_f64()))
}

// ---------------------------------------------------------------------
// 2. A caller's assert provable only with the lemma.

fn criterion_2() -> Outcome {
    let text = fs::read_to_string(program("lemma_use.relc")).map_err(|e| e.to_string())?;
    let with = prove_text(&text)?;
    let goal = "g::assert::1";
    ensure(status_name(&with, goal) == "proven", || format!("with R1: {}", status_name(&with, goal)))?;
    let vc = with.vcs.iter().find(|v| v.id.as_str() == goal).ok_or("no VC")?;
    ensure(
        vc.hypotheses.iter().any(|(id, _)| id.as_str() == "lemma::R1_lemma"),
        || "lemma not among the hypotheses".into(),
    )?;

    let without: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("relational R1:"))
        .collect::<Vec<_>>()
        .join("\n");
    ensure(without != text, || "clause not removed".into())?;
    let run = prove_text(&without)?;
    let rec = run.records.iter().find(|r| r.id.as_str() == goal).ok_or("no record")?;
    let st = status_name(&run, goal);
    ensure(
        rec.verdict == VerdictKind::Sat && st == "unknown",
        || format!("without R1: verdict {:?}, status {st}", rec.verdict),
    )?;
    Ok(format!("proven with the lemma; without it the solver says {:?}, status {st}", rec.verdict))
}

// ---------------------------------------------------------------------
// 3. Prototype-only library functions.

fn criterion_3() -> Outcome {
    let run = prove_file("crypto.relc")?;
    let ens = status_name(&run, "f::ensures::1");
    ensure(ens == "proven", || format!("f::ensures::1 is {ens}"))?;
    let lemma = status_name(&run, "lemma::Round_lemma");
    ensure(lemma == "assumed_valid", || format!("lemma is {lemma}"))?;
    ensure(run.output.wrappers.is_empty(), || "a wrapper was built without bodies".into())?;
    Ok("ensures proven, lemma assumed_valid".into())
}

// ---------------------------------------------------------------------
// 4. Loop invariants carried into the wrappers.

fn criterion_4() -> Outcome {
    let text = fs::read_to_string(program("loops.relc")).map_err(|e| e.to_string())?;
    let checked = pipeline::check(&SourceFile::new("loops.relc", &text)).map_err(|d| format!("{d:?}"))?;
    let out = transform(&checked);
    let printed = print(&out.program);
    for needle in [
        "loop invariant 2 * s_rel_1 == i_rel_1 * (i_rel_1 + 1);",
        "loop invariant 2 * s_rel_2 == i_rel_2 * (i_rel_2 + 1);",
        "loop invariant 0 <= c_rel_1 && c_rel_1 <= n_rel_1;",
    ] {
        ensure(printed.contains(needle), || format!("wrapper lacks `{needle}`"))?;
    }
    let goals = obligations(&out).map_err(|d| format!("{d:?}"))?;
    let inlined = goals
        .iter()
        .filter(|(id, k)| id.owner().starts_with("relational_wrapper_") && *k == VcKind::InvariantPreserve)
        .count();
    ensure(inlined >= 3, || format!("{inlined} wrapper invariant obligations"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (code, rows, _) = cli_prove(&program("loops.relc"), dir.path())?;
    ensure(code == 0, || format!("exit {code}: {rows:?}"))?;
    Ok(format!("{inlined} inlined invariant obligations, {} properties proved", rows.len()))
}

// ---------------------------------------------------------------------
// 5. Wrapper execution agrees with direct calls.

fn criterion_5() -> Outcome {
    let mut wrappers = 0;
    let mut samples = 0;
    for name in PROGRAMS {
        let checked = pipeline::load(&program(name)).map_err(|e| e.to_string())?;
        let out = transform(&checked);
        let interp = ExactInterp::new(&out.program);
        for info in out.wrappers.iter().filter(|w| !w.calls.is_empty()) {
            for (seed, range) in [(1, (-1000, 1000)), (2, (-40, 40))] {
                let config = OracleConfig {
                    samples: 1000,
                    seed,
                    range,
                    ..OracleConfig::default()
                };
                let r = differential(&interp, info, &config);
                ensure(r.passed(1000), || format!("{name} {}: {r:?}", info.wrapper))?;
                samples += r.accepted;
            }
            wrappers += 1;
        }
    }
    ensure(wrappers >= 6, || format!("only {wrappers} wrappers"))?;
    Ok(format!("{wrappers} wrappers, {samples} samples, 0 mismatches"))
}

// ---------------------------------------------------------------------
// 6. Status propagation against a brute-force evaluator.

fn link(kind: LinkKind, source: &str, target: &str) -> StatusLink {
    StatusLink {
        kind,
        source: source.into(),
        target: target.into(),
    }
}

fn verdict(result: VerdictKind) -> SolverVerdict {
    let model = (result == VerdictKind::Sat).then(Vec::new);
    SolverVerdict {
        result,
        model,
        wall_time: Duration::ZERO,
        solver: "oracle".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Said {
    Nothing,
    Sat,
    Unsat(Vec<PropertyId>),
}

const GOALS: [&str; 4] = ["w1::assert", "w1::invariant-init::1", "w2::assert", "g::assert::1"];

/// The least set of holding nodes, found by trying every candidate set of
/// undetermined nodes and keeping the smallest one closed under the
/// rules. Axioms always hold; clauses follow their assert.
fn brute_force(links: &[StatusLink], said: &BTreeMap<PropertyId, Said>) -> BTreeMap<PropertyId, String> {
    let mut axioms = BTreeSet::new();
    let mut lemma_needs: BTreeMap<PropertyId, BTreeSet<PropertyId>> = BTreeMap::new();
    let mut mirrors = BTreeMap::new();
    for l in links {
        match l.kind {
            LinkKind::BridgingEnsuresAssumed => {
                axioms.insert(l.target.clone());
            }
            LinkKind::LemmaAssumed => {
                axioms.insert(l.source.clone());
                axioms.insert(l.target.clone());
            }
            LinkKind::PropertyMirrorsAssert => {
                mirrors.insert(l.source.clone(), l.target.clone());
            }
            LinkKind::WrapperAssertProvesLemma => {
                let owner = l.source.owner();
                let mut needs: BTreeSet<PropertyId> =
                    said.keys().filter(|g| g.owner() == owner).cloned().collect();
                needs.insert(l.source.clone());
                lemma_needs.insert(l.target.clone(), needs);
            }
        }
    }
    let mut goals: BTreeSet<PropertyId> = said.keys().cloned().collect();
    goals.extend(mirrors.values().cloned());
    let known: BTreeSet<PropertyId> = goals
        .iter()
        .chain(axioms.iter())
        .chain(lemma_needs.keys())
        .chain(mirrors.keys())
        .cloned()
        .collect();
    let said_of = |g: &PropertyId| said.get(g).cloned().unwrap_or(Said::Nothing);
    let open: Vec<PropertyId> = goals
        .iter()
        .filter(|g| matches!(said_of(g), Said::Unsat(_)))
        .chain(lemma_needs.keys())
        .cloned()
        .collect();

    let holds_in = |set: &BTreeSet<PropertyId>, x: &PropertyId| {
        !known.contains(x) || axioms.contains(x) || set.contains(x)
    };
    let closed = |set: &BTreeSet<PropertyId>| {
        open.iter().all(|x| {
            let premise = match said_of(x) {
                Said::Unsat(deps) if goals.contains(x) => deps.iter().all(|d| d == x || holds_in(set, d)),
                _ => lemma_needs.get(x).is_some_and(|n| n.iter().all(|d| holds_in(set, d))),
            };
            !premise || set.contains(x)
        })
    };
    let mut least: Option<BTreeSet<PropertyId>> = None;
    for mask in 0u32..(1 << open.len()) {
        let set: BTreeSet<PropertyId> = open
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, x)| x.clone())
            .collect();
        if closed(&set) && least.as_ref().is_none_or(|l| set.len() < l.len()) {
            least = Some(set);
        }
    }
    let least = least.expect("the full set is closed");

    let mut out = BTreeMap::new();
    for g in &goals {
        let s = match said_of(g) {
            Said::Nothing => "unknown",
            Said::Sat => "invalid",
            Said::Unsat(_) if least.contains(g) => "proven",
            Said::Unsat(_) => "valid_under_condition",
        };
        out.insert(g.clone(), s.to_string());
    }
    for a in &axioms {
        out.insert(a.clone(), "assumed_valid".into());
    }
    for l in lemma_needs.keys() {
        let s = if least.contains(l) { "valid" } else { "valid_under_condition" };
        out.insert(l.clone(), s.into());
    }
    for (c, t) in &mirrors {
        let s = out[t].clone();
        out.insert(c.clone(), s);
    }
    out
}

fn replay_verdicts(links: &[StatusLink], goals: &[PropertyId], order: &[(PropertyId, Said)]) -> Option<StatusDb> {
    let mut db = StatusDb::seed(links, goals).ok()?;
    for (g, s) in order {
        let (v, deps) = match s {
            Said::Nothing => (verdict(VerdictKind::Timeout), vec![]),
            Said::Sat => (verdict(VerdictKind::Sat), vec![]),
            Said::Unsat(d) => (verdict(VerdictKind::Unsat), d.clone()),
        };
        db.record(g, &v, &deps).ok()?;
    }
    Some(db)
}

fn statuses(db: &StatusDb) -> BTreeMap<PropertyId, String> {
    db.consolidated().into_iter().map(|r| (r.id, r.status)).collect()
}

fn permutations(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        return f(v);
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, f);
        v.swap(k, i);
    }
}

fn criterion_6() -> Outcome {
    let pool = [
        link(LinkKind::PropertyMirrorsAssert, "h1::relational::P1", "w1::assert"),
        link(LinkKind::WrapperAssertProvesLemma, "w1::assert", "lemma::P1_lemma"),
        link(LinkKind::BridgingEnsuresAssumed, "h1::relational::P1", "h1::bridge"),
        link(LinkKind::LemmaAssumed, "h2::relational::P2", "lemma::P2_lemma"),
        link(LinkKind::PropertyMirrorsAssert, "h3::relational::P3", "w2::assert"),
        link(LinkKind::WrapperAssertProvesLemma, "w2::assert", "lemma::P3_lemma"),
    ];
    let lemma = |s: &str| PropertyId::lemma(s);
    let choices = [
        Said::Nothing,
        Said::Sat,
        Said::Unsat(vec![]),
        Said::Unsat(vec![lemma("P1_lemma")]),
        Said::Unsat(vec![lemma("P2_lemma")]),
        Said::Unsat(vec![lemma("P1_lemma"), lemma("P3_lemma")]),
    ];
    let goals: Vec<PropertyId> = GOALS.iter().map(|g| PropertyId::from(*g)).collect();

    let mut link_sets = vec![vec![]];
    for a in 0..pool.len() {
        link_sets.push(vec![pool[a].clone()]);
        for b in a + 1..pool.len() {
            link_sets.push(vec![pool[a].clone(), pool[b].clone()]);
            for c in b + 1..pool.len() {
                link_sets.push(vec![pool[a].clone(), pool[b].clone(), pool[c].clone()]);
            }
        }
    }

    let n = choices.len();
    let mut scenarios = 0usize;
    for links in &link_sets {
        for code in 0..n.pow(GOALS.len() as u32) {
            let mut c = code;
            let assignment: Vec<(PropertyId, Said)> = goals
                .iter()
                .map(|g| {
                    let s = choices[c % n].clone();
                    c /= n;
                    (g.clone(), s)
                })
                .collect();
            let Some(forward) = replay_verdicts(links, &goals, &assignment) else {
                continue;
            };
            let reversed: Vec<_> = assignment.iter().rev().cloned().collect();
            let backward = replay_verdicts(links, &goals, &reversed).ok_or("reversed run failed")?;
            let said: BTreeMap<PropertyId, Said> = assignment.into_iter().collect();
            let want = brute_force(links, &said);
            ensure(statuses(&forward) == want, || {
                format!("links {links:?}\nverdicts {said:?}\ngot {:?}\nwant {want:?}", statuses(&forward))
            })?;
            ensure(statuses(&backward) == want, || format!("order dependence on {links:?} {said:?}"))?;
            scenarios += 1;
        }
    }

    // The three-property example, verdicts in every order.
    let run = prove_file("monotonic.relc")?;
    let mut goal_ids: Vec<PropertyId> = run.db.goals().cloned().collect();
    goal_ids.sort();
    let deps: BTreeMap<PropertyId, Vec<PropertyId>> = run
        .records
        .iter()
        .map(|r| (r.id.clone(), r.dependencies.clone()))
        .collect();
    let mut fixpoints = BTreeSet::new();
    let mut perm: Vec<usize> = (0..goal_ids.len()).collect();
    permutations(&mut perm, 0, &mut |order| {
        let mut db = StatusDb::seed(&run.output.links, &goal_ids).expect("seeds");
        for &i in order {
            let g = &goal_ids[i];
            db.record(g, &verdict(VerdictKind::Unsat), &deps[g]).expect("goal");
        }
        fixpoints.insert(format!("{:?}", statuses(&db)));
    });
    ensure(fixpoints.len() == 1, || format!("{} distinct fixpoints", fixpoints.len()))?;
    Ok(format!(
        "{} link sets, {scenarios} verdict scenarios match; {} orders reach one fixpoint",
        link_sets.len(),
        (1..=goal_ids.len()).product::<usize>()
    ))
}

// ---------------------------------------------------------------------
// 7. Solver answers agree with brute force on small boxes.

#[derive(Debug, Clone)]
enum T {
    V(usize),
    C(i64),
    Neg(Box<T>),
    Bin(char, Box<T>, Box<T>),
}

#[derive(Debug, Clone)]
enum P {
    Cmp(BinOp, T, T),
    Not(Box<P>),
    Log(BinOp, Box<P>, Box<P>),
}

const VARS: [&str; 3] = ["x", "y", "z"];

fn gen_t(rng: &mut ChaCha8Rng, depth: u32) -> T {
    if depth == 0 || rng.gen_ratio(1, 3) {
        return if rng.gen_bool(0.6) {
            T::V(rng.gen_range(0..VARS.len()))
        } else {
            T::C(rng.gen_range(-5..=5))
        };
    }
    match rng.gen_range(0..7) {
        0 => T::Neg(Box::new(gen_t(rng, depth - 1))),
        k @ 1..=3 => T::Bin(['+', '-', '*'][k - 1], Box::new(gen_t(rng, depth - 1)), Box::new(gen_t(rng, depth - 1))),
        4 => T::Bin('*', Box::new(gen_t(rng, depth - 1)), Box::new(gen_t(rng, depth - 1))),
        k => {
            // Nonzero constant divisors keep the formula free of guards.
            let d = [-3, -2, 2, 3, 4][rng.gen_range(0..5)];
            T::Bin(if k == 5 { '/' } else { '%' }, Box::new(gen_t(rng, depth - 1)), Box::new(T::C(d)))
        }
    }
}

fn gen_p(rng: &mut ChaCha8Rng, depth: u32) -> P {
    const CMP: [BinOp; 6] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];
    if depth == 0 || rng.gen_bool(0.4) {
        return P::Cmp(CMP[rng.gen_range(0..6)], gen_t(rng, 2), gen_t(rng, 2));
    }
    match rng.gen_range(0..4) {
        0 => P::Not(Box::new(gen_p(rng, depth - 1))),
        k => P::Log(
            [BinOp::And, BinOp::Or, BinOp::Implies][k - 1],
            Box::new(gen_p(rng, depth - 1)),
            Box::new(gen_p(rng, depth - 1)),
        ),
    }
}

fn eval_t(t: &T, env: &[i64; 3]) -> i64 {
    match t {
        T::V(i) => env[*i],
        T::C(c) => *c,
        T::Neg(a) => -eval_t(a, env),
        T::Bin(op, a, b) => {
            let (a, b) = (eval_t(a, env), eval_t(b, env));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                // Rust's `/` and `%` truncate, as RelC's do.
                '/' => a / b,
                _ => a % b,
            }
        }
    }
}

fn eval_p(p: &P, env: &[i64; 3]) -> bool {
    match p {
        P::Cmp(op, a, b) => {
            let (a, b) = (eval_t(a, env), eval_t(b, env));
            match op {
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                BinOp::Ge => a >= b,
                BinOp::Eq => a == b,
                _ => a != b,
            }
        }
        P::Not(a) => !eval_p(a, env),
        P::Log(op, a, b) => {
            let (a, b) = (eval_p(a, env), eval_p(b, env));
            match op {
                BinOp::And => a && b,
                BinOp::Or => a || b,
                _ => !a || b,
            }
        }
    }
}

fn expr_t(t: &T) -> Expr {
    match t {
        T::V(i) => Expr::var(VARS[*i]),
        T::C(c) => Expr::Int(*c),
        T::Neg(a) => Expr::Unary(UnOp::Neg, Box::new(expr_t(a))),
        T::Bin(op, a, b) => {
            let op = match op {
                '+' => BinOp::Add,
                '-' => BinOp::Sub,
                '*' => BinOp::Mul,
                '/' => BinOp::Div,
                _ => BinOp::Rem,
            };
            Expr::binary(op, expr_t(a), expr_t(b))
        }
    }
}

fn expr_p(p: &P) -> Expr {
    match p {
        P::Cmp(op, a, b) => Expr::binary(*op, expr_t(a), expr_t(b)),
        P::Not(a) => Expr::not(expr_p(a)),
        P::Log(op, a, b) => Expr::binary(*op, expr_p(a), expr_p(b)),
    }
}

fn boxed(body: Expr) -> Expr {
    let bounds = VARS.iter().flat_map(|v| {
        [
            Expr::binary(BinOp::Le, Expr::Int(-5), Expr::var(*v)),
            Expr::binary(BinOp::Le, Expr::var(*v), Expr::Int(5)),
        ]
    });
    implies(conj(bounds), body)
}

fn all_points() -> impl Iterator<Item = [i64; 3]> {
    (-5..=5).flat_map(|x| (-5..=5).flat_map(move |y| (-5..=5).map(move |z| [x, y, z])))
}

fn criterion_7() -> Outcome {
    let config = solver()?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut unsat, mut sat) = (0, 0);
    for k in 0..150 {
        // A third random predicates, a third tight bounds on a random term
        // (valid), a third bounds off by one (falsifiable).
        let p = match k % 3 {
            0 => gen_p(&mut rng, 3),
            shape => {
                let t = gen_t(&mut rng, 3);
                let min = all_points().map(|e| eval_t(&t, &e)).min().expect("nonempty box");
                let bound = if shape == 1 { min } else { min + 1 };
                P::Cmp(BinOp::Ge, t, T::C(bound))
            }
        };
        let body = boxed(expr_p(&p));
        let vc = VerificationCondition {
            id: PropertyId::from(format!("random::assert::{k}").as_str()),
            kind: VcKind::Assert,
            function: "random".into(),
            goal: forall(VARS.iter().map(|v| v.to_string()), body.clone()),
            hypotheses: vec![],
            assumes: vec![],
            span: Span::default(),
        };
        let v = run_solver(&encode(&vc), &config).map_err(|e| e.to_string())?;
        let brute = all_points().find(|e| !eval_p(&p, e));
        match v.result {
            VerdictKind::Unsat => {
                ensure(brute.is_none(), || format!("unsat but {brute:?} refutes {p:?}"))?;
                unsat += 1;
            }
            VerdictKind::Sat => {
                let model: BTreeMap<String, BigInt> = v.model.unwrap_or_default().into_iter().collect();
                let mut env = ExactEnv::new();
                for name in VARS {
                    env.bind(name, model.get(name).cloned().unwrap_or_default());
                }
                let empty = Default::default();
                let replayed = eval_predicate(&empty, &body, &env, (-5, 5)).map_err(|e| e.to_string())?;
                ensure(!replayed, || format!("model {model:?} satisfies {p:?}"))?;
                ensure(brute.is_some(), || format!("sat but brute force finds no refutation of {p:?}"))?;
                sat += 1;
            }
            other => return Err(format!("inconclusive {other:?} on {p:?}")),
        }
    }
    ensure(unsat >= 20 && sat >= 20, || format!("unbalanced: {unsat} unsat, {sat} sat"))?;
    Ok(format!("{} VCs: {unsat} unsat with no brute-force refutation, {sat} sat models replay false", unsat + sat))
}

// ---------------------------------------------------------------------
// 8. A false property is refuted with a replayed counterexample.

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (code, rows, _) = cli_prove(&program("antitone.relc"), dir.path())?;
    ensure(code == 3, || format!("exit {code}"))?;
    ensure(rows.iter().all(|r| r["status"] != "valid"), || "something is valid".into())?;
    let row = rows
        .iter()
        .find(|r| r["id"] == "relational_wrapper_1::assert")
        .ok_or("no wrapper row")?;
    ensure(row["status"] == "invalid", || format!("{row}"))?;
    let get = |k: &str| -> Result<BigInt, String> {
        row["counterexample"][k]
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("no value for {k} in {row}"))
    };
    let (x1, x2) = (get("x1")?, get("x2")?);
    let checked = pipeline::load(&program("antitone.relc")).map_err(|e| e.to_string())?;
    let interp = ExactInterp::new(checked.program());
    let f = |x: &BigInt| interp.call("f1", std::slice::from_ref(x)).map_err(|e| e.to_string());
    let (y1, y2) = (f(&x1)?, f(&x2)?);
    ensure(x1 < x2 && y1 >= y2, || format!("f1({x1}) = {y1}, f1({x2}) = {y2} is no counterexample"))?;
    Ok(format!("exit 3; x1 = {x1}, x2 = {x2} gives f1 values {y1} >= {y2}"))
}

// ---------------------------------------------------------------------
// 9. Parser fuzzing and solver process reaping.

const TOKENS: &[&str] = &[
    "int", "if", "else", "while", "return", "(", ")", "{", "}", ";", ",", "=", "==", "<", "<=", "+",
    "-", "*", "/", "%", "&&", "||", "!", "==>", "x", "y", "f", "0", "1", "42", "/*@", "*/",
    "requires", "ensures", "assigns", "\\nothing", "relational", "R:", "\\forall", "\\call",
    "\\result", "loop", "invariant", "assert", "axiomatic", "logic", "lemma", "\n", " ",
    "99999999999999999999999", "//", "@", "\\exists",
];

fn fuzz_input(rng: &mut ChaCha8Rng, seeds: &[Vec<u8>]) -> Vec<u8> {
    match rng.gen_range(0..3) {
        0 => (0..rng.gen_range(0..80)).map(|_| rng.gen()).collect(),
        1 => {
            let mut s = String::new();
            for _ in 0..rng.gen_range(0..60) {
                s.push_str(TOKENS[rng.gen_range(0..TOKENS.len())]);
                s.push(' ');
            }
            s.into_bytes()
        }
        _ => {
            let mut b = seeds[rng.gen_range(0..seeds.len())].clone();
            for _ in 0..rng.gen_range(1..4) {
                if b.is_empty() {
                    break;
                }
                let i = rng.gen_range(0..b.len());
                let j = rng.gen_range(i..b.len().min(i + 12) + 1).min(b.len());
                match rng.gen_range(0..4) {
                    0 => {
                        b.drain(i..j);
                    }
                    1 => {
                        let chunk = b[i..j].to_vec();
                        let at = rng.gen_range(0..=b.len());
                        b.splice(at..at, chunk);
                    }
                    2 => b[i] = rng.gen(),
                    _ => {
                        let t = TOKENS[rng.gen_range(0..TOKENS.len())].as_bytes();
                        b.splice(i..i, t.iter().copied());
                    }
                }
            }
            b
        }
    }
}

fn children_of_self() -> Vec<u32> {
    let me = std::process::id();
    let mut kids = Vec::new();
    for entry in fs::read_dir("/proc").into_iter().flatten().flatten() {
        let Ok(pid) = entry.file_name().to_string_lossy().parse::<u32>() else {
            continue;
        };
        let Ok(stat) = fs::read_to_string(entry.path().join("stat")) else {
            continue;
        };
        // Field 4 is the parent pid; the command name may contain spaces.
        let after = stat.rsplit_once(')').map_or("", |(_, rest)| rest);
        if after.split_whitespace().nth(1).and_then(|p| p.parse().ok()) == Some(me) {
            kids.push(pid);
        }
    }
    kids
}

fn criterion_9() -> Outcome {
    let seeds: Vec<Vec<u8>> = PROGRAMS
        .iter()
        .map(|p| fs::read(program(p)).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crash = None;
    let mut parsed = 0;
    const INPUTS: usize = 100_000;
    for _ in 0..INPUTS {
        let input = fuzz_input(&mut rng, &seeds);
        let r = panic::catch_unwind(AssertUnwindSafe(|| {
            let Ok(p) = parse_bytes(&input) else { return false };
            // Anything that parses also goes through the later stages.
            if let Ok(c) = relprove_core::check::typecheck(p) {
                let _ = obligations(&transform(&c));
            }
            true
        }));
        match r {
            Ok(ok) => parsed += usize::from(ok),
            Err(_) => {
                crash = Some(String::from_utf8_lossy(&input).into_owned());
                break;
            }
        }
    }
    panic::set_hook(hook);
    if let Some(input) = crash {
        return Err(format!("panic on input {input:?}"));
    }

    // A stand-in solver that never answers: it records its pid, then
    // becomes `sleep`.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pidfile = dir.path().join("pid");
    let script = dir.path().join("stuck-solver");
    fs::write(&script, format!("#!/bin/sh\necho $$ > {}\nexec sleep 60\n", pidfile.display())).map_err(|e| e.to_string())?;
    Command::new("chmod").arg("+x").arg(&script).status().map_err(|e| e.to_string())?;
    let mut stuck = SolverConfig::new(&script);
    stuck.timeout = Duration::from_millis(500);
    let vc = VerificationCondition {
        id: "reap::assert::1".into(),
        kind: VcKind::Assert,
        function: "reap".into(),
        goal: Expr::Bool(true),
        hypotheses: vec![],
        assumes: vec![],
        span: Span::default(),
    };
    let start = Instant::now();
    let v = run_solver(&encode(&vc), &stuck).map_err(|e| e.to_string())?;
    ensure(v.result == VerdictKind::Timeout, || format!("stuck solver gave {:?}", v.result))?;
    ensure(start.elapsed() < Duration::from_secs(5), || format!("timeout took {:?}", start.elapsed()))?;
    let pid = fs::read_to_string(&pidfile).map_err(|e| e.to_string())?;
    ensure(!Path::new(&format!("/proc/{}", pid.trim())).exists(), || format!("process {} survived", pid.trim()))?;

    // The real solver on a query it cannot finish in time, several at once.
    let mut real = solver()?;
    real.timeout = Duration::from_secs(1);
    let hard = VerificationCondition {
        id: "reap::assert::2".into(),
        goal: forall(
            ["p".to_string(), "q".to_string()],
            implies(
                conj([
                    Expr::binary(BinOp::Gt, Expr::var("p"), Expr::Int(1)),
                    Expr::binary(BinOp::Gt, Expr::var("q"), Expr::Int(1)),
                ]),
                Expr::binary(
                    BinOp::Ne,
                    Expr::binary(BinOp::Mul, Expr::var("p"), Expr::var("q")),
                    Expr::Int(1_000_000_016_000_000_063),
                ),
            ),
        ),
        ..vc
    };
    let scripts = vec![encode(&hard); 4];
    let start = Instant::now();
    let verdicts = pipeline::solve_all(&scripts, &real, 4);
    let took = start.elapsed();
    for v in verdicts {
        let v = v.map_err(|e| e.to_string())?;
        ensure(matches!(v.result, VerdictKind::Timeout | VerdictKind::Unknown | VerdictKind::Sat), || {
            format!("{:?}", v.result)
        })?;
    }
    ensure(took < Duration::from_secs(10), || format!("4 parallel 1s timeouts took {took:?}"))?;
    let left = children_of_self();
    ensure(left.is_empty(), || format!("unreaped children {left:?}"))?;
    Ok(format!(
        "{INPUTS} fuzz inputs ({parsed} parsed) without a panic; timed-out solvers reaped"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("monotonicity example ends all green", criterion_1),
        ("caller assert needs the lemma", criterion_2),
        ("prototype-only crypto round trip", criterion_3),
        ("loop invariants inlined into wrappers", criterion_4),
        ("differential oracle on every wrapper", criterion_5),
        ("status propagation model check", criterion_6),
        ("solver agrees with brute force", criterion_7),
        ("false property refuted with counterexample", criterion_8),
        ("parser fuzzing and process reaping", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
