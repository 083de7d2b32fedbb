use std::path::Path;

use relprove_core::frontend::{parse_source, print, SourceFile};
use relprove_core::interp::{differential, OracleConfig};
use relprove_core::pipeline::{self, Outcome, ProveConfig};
use relprove_core::smt::{discover_solver, SolverConfig};
use relprove_core::transform::transform;
use relprove_core::ExactInterp;

const MONO: &str = r"
/*@ assigns \nothing;
  @ relational R1: \forall int x1, x2; x1 < x2 ==> \call(f1, x1) < \call(f1, x2);
  @*/
int f1(int x) { return x * 2; }

/*@ assigns \nothing;
  @ relational R2: \forall int y1, y2; y1 < y2 ==> \call(f2, y1) < \call(f2, y2);
  @*/
int f2(int y) { return f1(y) + 1; }
";

fn checked(text: &str) -> relprove_core::check::CheckedProgram {
    pipeline::check(&SourceFile::new("mono.relc", text)).expect("well formed")
}

#[test]
fn transformed_program_prints_stably() {
    let out = transform(&checked(MONO));
    let once = print(&out.program);
    let reparsed = parse_source(&SourceFile::new("t.relc", &once)).expect("printed output parses");
    assert_eq!(print(&reparsed), once);
}

#[test]
fn wrappers_match_direct_calls() {
    let out = transform(&checked(MONO));
    let interp = ExactInterp::new(&out.program);
    assert_eq!(out.wrappers.len(), 2);
    for w in &out.wrappers {
        let report = differential(&interp, w, &OracleConfig::default());
        assert_eq!(report.mismatch_count, 0, "{report:?}");
        assert!(report.accepted > 0);
    }
}

#[test]
fn prove_from_a_file() {
    let Ok(solver) = discover_solver(None) else {
        eprintln!("no SMT solver found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("mono.relc");
    std::fs::write(&file, MONO).unwrap();
    let program = pipeline::load(Path::new(&file)).unwrap();
    let run = pipeline::prove(&program, &ProveConfig::new(SolverConfig::new(solver))).unwrap();
    assert_eq!(run.outcome(), Outcome::AllHold, "{:#?}", run.report());
    assert!(run.self_check.is_empty());
}
