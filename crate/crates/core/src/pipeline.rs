//! End-to-end proving: front end, transform, VC generation, solving and
//! status propagation.
//!
//! Solver jobs run on a small thread pool, but verdicts are recorded in VC
//! order once all jobs are done, so a run is deterministic apart from
//! timings. A `sat` verdict counts as a refutation only after the model is
//! replayed through the interpreter and actually violates the obligation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::check::{typecheck, CheckedProgram};
use crate::diag::{render, Diagnostic};
use crate::frontend::{parse_source, SourceFile};
use crate::ids::PropertyId;
use crate::interp::{differential, replay, InterpConfig, OracleConfig, OracleReport};
use crate::smt::{encode, run_solver, SmtScript, SolverConfig, SolverError, SolverVerdict, VerdictKind};
use crate::status::{ReportRow, StatusDb, StatusError};
use crate::transform::{transform, TransformOutput};
use crate::vcgen::{generate, obligations, VcKind, VerificationCondition};
use crate::ExactInterp;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}", render(&path.display().to_string(), diagnostics).trim_end())]
    Diagnostics { path: PathBuf, diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Status(#[from] StatusError),
}

/// Reads, parses and typechecks one file.
pub fn load(path: &Path) -> Result<CheckedProgram, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let diagnostics = |diagnostics| PipelineError::Diagnostics {
        path: path.to_path_buf(),
        diagnostics,
    };
    let src = SourceFile::from_bytes(path, &bytes).map_err(|d| diagnostics(vec![d]))?;
    check(&src).map_err(diagnostics)
}

pub fn check(src: &SourceFile) -> Result<CheckedProgram, Vec<Diagnostic>> {
    typecheck(parse_source(src)?)
}

#[derive(Debug, Clone)]
pub struct ProveConfig {
    pub solver: SolverConfig,
    /// Solver processes running at once; at least one.
    pub jobs: usize,
    /// Seeds the wrapper self-check.
    pub seed: u64,
    /// Quantifier range used when replaying counterexamples.
    pub quant_range: (i64, i64),
    /// Directory receiving one `.smt2` file per VC.
    pub emit_vcs: Option<PathBuf>,
    /// Random samples per wrapper in the self-check; 0 disables it.
    pub self_check_samples: usize,
}

impl ProveConfig {
    pub fn new(solver: SolverConfig) -> Self {
        ProveConfig {
            solver,
            jobs: 1,
            seed: 0,
            quant_range: crate::interp::DEFAULT_QUANT_RANGE,
            emit_vcs: None,
            self_check_samples: 256,
        }
    }
}

/// What happened to one VC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VcRecord {
    pub id: PropertyId,
    pub kind: VcKind,
    pub function: String,
    /// The solver's answer, before any replay.
    #[serde(flatten)]
    pub verdict: VerdictKind,
    pub time_ms: u64,
    pub dependencies: Vec<PropertyId>,
    /// Set when a `sat` model was replayed and confirmed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<BTreeMap<String, String>>,
    /// Why the answer did not settle the VC, if it did not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug)]
pub struct ProveRun {
    pub output: TransformOutput,
    pub vcs: Vec<VerificationCondition>,
    pub records: Vec<VcRecord>,
    pub db: StatusDb,
    /// Wrappers whose self-check found a disagreement with direct calls.
    pub self_check: Vec<OracleReport>,
}

/// How a run ended, from the consolidated statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Every property is proven, valid or assumed valid.
    AllHold,
    /// Some property has a confirmed counterexample.
    Refuted,
    /// Nothing refuted, but something is unknown or still conditional.
    Open,
}

impl ProveRun {
    pub fn report(&self) -> Vec<ReportRow> {
        self.db.consolidated()
    }

    pub fn outcome(&self) -> Outcome {
        outcome(&self.report())
    }
}

pub fn outcome(rows: &[ReportRow]) -> Outcome {
    if rows.iter().any(|r| r.status == "invalid") {
        Outcome::Refuted
    } else if rows
        .iter()
        .all(|r| matches!(r.status.as_str(), "proven" | "valid" | "assumed_valid"))
    {
        Outcome::AllHold
    } else {
        Outcome::Open
    }
}

/// Runs every stage after typechecking.
pub fn prove(checked: &CheckedProgram, config: &ProveConfig) -> Result<ProveRun, PipelineError> {
    let output = transform(checked);
    let diagnostics = |diagnostics| PipelineError::Diagnostics {
        path: PathBuf::from("<transformed>"),
        diagnostics,
    };
    let goals: Vec<PropertyId> = obligations(&output)
        .map_err(diagnostics)?
        .into_iter()
        .map(|(id, _)| id)
        .collect();
    let mut db = StatusDb::seed(&output.links, &goals)?;
    let vcs = generate(&output, &db).map_err(diagnostics)?;
    let scripts: Vec<SmtScript> = vcs.iter().map(encode).collect();

    if let Some(dir) = &config.emit_vcs {
        emit(dir, &vcs, &scripts)?;
    }

    let verdicts = solve_all(&scripts, &config.solver, config.jobs);
    let interp = ExactInterp::with_config(
        &output.program,
        InterpConfig {
            quant_range: config.quant_range,
            ..InterpConfig::default()
        },
    );

    let mut records = Vec::with_capacity(vcs.len());
    for ((vc, script), verdict) in vcs.iter().zip(&scripts).zip(verdicts) {
        let mut verdict = verdict?;
        let answer = verdict.result.clone();
        let deps = vc.dependencies();
        let mut counterexample = None;
        let mut note = None;
        match &verdict.result {
            VerdictKind::Sat => match confirm(&interp, &output, vc, script, &verdict) {
                Ok(cex) => {
                    verdict.model = Some(
                        cex.iter()
                            .map(|(k, v)| (k.clone(), v.parse().expect("decimal")))
                            .collect(),
                    );
                    counterexample = Some(cex);
                }
                Err(why) => {
                    note = Some(why);
                    verdict.result = VerdictKind::Unknown;
                    verdict.model = None;
                }
            },
            VerdictKind::Timeout => {
                note = Some(format!(
                    "solver timed out after {}s",
                    config.solver.timeout.as_secs_f64()
                ));
            }
            VerdictKind::Unknown => note = Some("solver answered unknown".into()),
            VerdictKind::SolverError(e) => note = Some(format!("solver error: {e}")),
            VerdictKind::Unsat => {}
        }
        db.record(&vc.id, &verdict, &deps)?;
        if let Some(n) = &note {
            db.explain(&vc.id, n.clone())?;
        }
        records.push(VcRecord {
            id: vc.id.clone(),
            kind: vc.kind,
            function: vc.function.clone(),
            verdict: answer,
            time_ms: verdict.wall_time.as_millis() as u64,
            dependencies: deps,
            counterexample,
            note,
        });
    }

    let mut self_check = Vec::new();
    if config.self_check_samples > 0 {
        let oracle = OracleConfig {
            samples: config.self_check_samples,
            seed: config.seed,
            ..OracleConfig::default()
        };
        for info in output.wrappers.iter().filter(|w| !w.calls.is_empty()) {
            let report = differential(&interp, info, &oracle);
            if report.mismatch_count > 0 {
                self_check.push(report);
            }
        }
    }

    Ok(ProveRun {
        output,
        vcs,
        records,
        db,
        self_check,
    })
}

fn emit(dir: &Path, vcs: &[VerificationCondition], scripts: &[SmtScript]) -> Result<(), PipelineError> {
    let write_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Write { path, source }
    };
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    for (vc, s) in vcs.iter().zip(scripts) {
        let path = dir.join(format!("{}.smt2", vc.id.file_stem()));
        fs::write(&path, &s.text).map_err(write_err(&path))?;
    }
    Ok(())
}

/// Solves the scripts on `jobs` worker threads; results are in input
/// order.
pub fn solve_all(
    scripts: &[SmtScript],
    solver: &SolverConfig,
    jobs: usize,
) -> Vec<Result<SolverVerdict, SolverError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SolverVerdict, SolverError>>>> =
        Mutex::new((0..scripts.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, scripts.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(script) = scripts.get(i) else { break };
                let r = run_solver(script, solver);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every index claimed once"))
        .collect()
}

/// Replays a solver model through the interpreter. On success returns the
/// function arguments that violate the obligation; otherwise says why the
/// model is not a counterexample.
fn confirm(
    interp: &ExactInterp<'_>,
    output: &TransformOutput,
    vc: &VerificationCondition,
    script: &SmtScript,
    verdict: &SolverVerdict,
) -> Result<BTreeMap<String, String>, String> {
    let f = output
        .program
        .function(&vc.function)
        .ok_or_else(|| format!("no function '{}' to replay", vc.function))?;
    let model: BTreeMap<&str, &BigInt> = verdict
        .model
        .iter()
        .flatten()
        .map(|(k, v)| (k.as_str(), v))
        .collect();
    let by_name: BTreeMap<&str, &str> = script
        .constants
        .iter()
        .map(|(sym, name)| (name.as_str(), sym.as_str()))
        .collect();
    // Parameters the model leaves out are unconstrained; any value works.
    let args: Vec<BigInt> = f
        .params
        .iter()
        .map(|p| {
            by_name
                .get(p.as_str())
                .and_then(|sym| model.get(sym))
                .map_or_else(|| BigInt::from(0), |v| (*v).clone())
        })
        .collect();
    let shown = || {
        f.params
            .iter()
            .zip(&args)
            .map(|(p, v)| format!("{p} = {v}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let r = replay(interp, output, &f.name, &args);
    if r.violates(&vc.id) {
        return Ok(f
            .params
            .iter()
            .zip(&args)
            .map(|(p, v)| (p.clone(), v.to_string()))
            .collect());
    }
    let why = if !r.requires_hold {
        "violates the precondition".to_string()
    } else if let Some(e) = &r.error {
        format!("stops with '{e}' before the obligation fails")
    } else {
        "satisfies the obligation when executed".to_string()
    };
    Err(format!(
        "solver model ({}) {why}; the failure may come from a weak invariant or callee contract",
        shown()
    ))
}

#[cfg(test)]
mod tests;
