use super::*;
use crate::smt::discover_solver;
use crate::status::Status;

fn config() -> ProveConfig {
    let path = discover_solver(None).expect("an SMT solver (z3 or cvc5) on PATH");
    ProveConfig::new(SolverConfig::new(path))
}

fn run(src: &str, config: &ProveConfig) -> ProveRun {
    let checked = check(&SourceFile::new("t.relc", src)).unwrap();
    prove(&checked, config).unwrap()
}

fn status(run: &ProveRun, id: &str) -> Status {
    run.db.status(&PropertyId::from(id)).cloned().unwrap()
}

const MONO: &str = r"
/*@ assigns \nothing;
    relational R1: \forall int x1, x2; x1 < x2 ==> \call(f1, x1) < \call(f1, x2);
*/
int f1(int x) { return x * 2; }
";

#[test]
fn monotone_function_ends_all_green() {
    let r = run(MONO, &config());
    assert_eq!(r.outcome(), Outcome::AllHold, "{:#?}", r.report());
    assert_eq!(status(&r, "lemma::R1_lemma"), Status::Valid);
    assert_eq!(status(&r, "f1::bridge"), Status::AssumedValid);
    assert!(matches!(status(&r, "f1::relational::R1"), Status::Proven { .. }));
    assert!(r.self_check.is_empty());
}

#[test]
fn antitone_function_is_refuted_with_a_replayed_counterexample() {
    let r = run(&MONO.replace("x * 2", "-x"), &config());
    assert_eq!(r.outcome(), Outcome::Refuted);
    let rec = r
        .records
        .iter()
        .find(|v| v.id.as_str() == "relational_wrapper_1::assert")
        .unwrap();
    let cex = rec.counterexample.as_ref().unwrap();
    let x1: i64 = cex["x1"].parse().unwrap();
    let x2: i64 = cex["x2"].parse().unwrap();
    assert!(x1 < x2 && -x1 >= -x2, "{cex:?}");
    assert!(matches!(status(&r, "f1::relational::R1"), Status::Invalid { .. }));
    assert!(matches!(status(&r, "lemma::R1_lemma"), Status::ValidUnderCondition { .. }));
    assert!(r.report().iter().all(|row| row.status != "valid"));
}

#[test]
fn unconfirmed_models_stay_unknown_with_a_reason() {
    // The invariant is too weak to prove the postcondition, but the
    // postcondition holds on every execution, so no model replays.
    let src = r"
/*@ requires n >= 0; ensures \result == n * c; */
int sum(int n, int c) {
  int i = 0;
  int s = 0;
  /*@ loop invariant 0 <= i <= n; */
  while (i < n) { s = s + c; i = i + 1; }
  return s;
}";
    let r = run(src, &config());
    assert_eq!(r.outcome(), Outcome::Open);
    let rows = r.report();
    let row = rows.iter().find(|row| row.id.as_str() == "sum::ensures::1").unwrap();
    assert_eq!(row.status, "unknown");
    assert!(row.explanation.contains("satisfies the obligation"), "{}", row.explanation);
}

#[test]
fn reports_are_reproducible_and_vcs_are_emitted() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config();
    cfg.jobs = 4;
    cfg.emit_vcs = Some(dir.path().to_path_buf());
    let strip = |rows: Vec<ReportRow>| {
        rows.into_iter()
            .map(|mut r| {
                r.time_ms = None;
                r
            })
            .collect::<Vec<_>>()
    };
    let a = run(MONO, &cfg);
    let b = run(MONO, &cfg);
    assert_eq!(strip(a.report()), strip(b.report()));
    for vc in &a.vcs {
        let text = fs::read_to_string(dir.path().join(format!("{}.smt2", vc.id.file_stem()))).unwrap();
        assert!(text.contains("(check-sat)"));
    }
}

#[test]
fn pool_keeps_input_order() {
    let cfg = config();
    let scripts: Vec<SmtScript> = (0..6)
        .map(|i| {
            let text = if i % 2 == 0 {
                "(assert false)\n(check-sat)\n"
            } else {
                "(assert true)\n(check-sat)\n"
            };
            SmtScript {
                logic: "QF_LIA".into(),
                declarations: Vec::new(),
                assertions: Vec::new(),
                text: text.into(),
                constants: BTreeMap::new(),
            }
        })
        .collect();
    let got: Vec<VerdictKind> = solve_all(&scripts, &cfg.solver, 3)
        .into_iter()
        .map(|v| v.unwrap().result)
        .collect();
    let want: Vec<VerdictKind> = (0..6)
        .map(|i| if i % 2 == 0 { VerdictKind::Unsat } else { VerdictKind::Sat })
        .collect();
    assert_eq!(got, want);
}

#[test]
fn load_reports_io_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load(&dir.path().join("absent.relc")), Err(PipelineError::Read { .. })));
    let bad = dir.path().join("bad.relc");
    fs::write(&bad, "int f( { }").unwrap();
    match load(&bad) {
        Err(e @ PipelineError::Diagnostics { .. }) => assert!(e.to_string().contains("bad.relc:1:")),
        other => panic!("{other:?}"),
    }
}
