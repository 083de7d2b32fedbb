//! `relprove`: checks, transforms and proves relational properties of
//! RelC programs.
//!
//! Exit codes:
//!
//! | code | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | success; for `prove`, every property holds                |
//! | 1    | diagnostics in the input, bad arguments, or runtime error |
//! | 2    | I/O failure or no usable solver                           |
//! | 3    | `prove`: some property has a confirmed counterexample     |
//! | 4    | `prove`: some property is unknown or still conditional    |

mod report;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;

use relprove_core::frontend::print;
use relprove_core::interp::{eval_predicate, InterpConfig};
use relprove_core::pipeline::{self, Outcome, PipelineError, ProveConfig};
use relprove_core::smt::{discover_solver, SolverConfig, SOLVER_ENV};
use relprove_core::status::ReportRow;
use relprove_core::transform::transform;
use relprove_core::{ExactEnv, ExactInterp};

const OK: u8 = 0;
const DIAGNOSTICS: u8 = 1;
const IO: u8 = 2;
const INVALID: u8 = 3;
const OPEN: u8 = 4;

const REPORT_FILE: &str = "report.json";
const VCS_FILE: &str = "vcs.json";

#[derive(Parser)]
#[command(name = "relprove", version, about = "Relational property prover for RelC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, resolve and typecheck; report diagnostics only.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Write the self-composed program and its status links.
    Transform {
        file: PathBuf,
        #[arg(short, long, default_value = "relprove-out")]
        out: PathBuf,
    },
    /// Run the whole pipeline and report property statuses.
    Prove {
        file: PathBuf,
        /// SMT solver executable; otherwise RELPROVE_SOLVER, then z3 or cvc5 on PATH.
        #[arg(long)]
        solver: Option<PathBuf>,
        /// Per-VC solver timeout in seconds.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
        /// Solver processes run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(short, long, default_value = "relprove-out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Seed for the wrapper self-check.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Quantifier range used when replaying counterexamples, as LO..HI.
        #[arg(long, value_parser = parse_range, default_value = "-16..16")]
        quant_range: (i64, i64),
        /// Also write every VC as an SMT-LIB file into this directory.
        #[arg(long)]
        emit_vcs: Option<PathBuf>,
        /// Random samples per wrapper for the self-check; 0 disables it.
        #[arg(long, default_value_t = 256)]
        self_check: usize,
    },
    /// Evaluate a function on integer arguments, or a relational property
    /// over a bounded range.
    Eval {
        file: PathBuf,
        /// Function name, or property name with --property.
        name: String,
        #[arg(allow_hyphen_values = true)]
        args: Vec<BigInt>,
        /// Treat NAME as a relational property.
        #[arg(long)]
        property: bool,
        #[arg(long, value_parser = parse_range, default_value = "-16..16")]
        quant_range: (i64, i64),
    },
    /// Print the report written by the last `prove`.
    Report {
        #[arg(short, long, default_value = "relprove-out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got '{s}'"))?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { DIAGNOSTICS } else { OK });
        }
    };
    let code = match cli.command {
        Command::Check { files } => cmd_check(&files),
        Command::Transform { file, out } => cmd_transform(&file, &out),
        Command::Prove {
            file,
            solver,
            timeout,
            jobs,
            out,
            format,
            seed,
            quant_range,
            emit_vcs,
            self_check,
        } => {
            let Some(timeout) = Duration::try_from_secs_f64(timeout).ok().filter(|t| !t.is_zero()) else {
                eprintln!("error: --timeout must be a positive number of seconds");
                return ExitCode::from(DIAGNOSTICS);
            };
            let path = match discover_solver(solver.as_deref()) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!(
                        "error: {e}\nhint: install z3 or cvc5, pass --solver <path>, or set {SOLVER_ENV}"
                    );
                    return ExitCode::from(IO);
                }
            };
            let mut solver = SolverConfig::new(path);
            solver.timeout = timeout;
            let config = ProveConfig {
                solver,
                jobs: jobs.max(1),
                seed,
                quant_range,
                emit_vcs,
                self_check_samples: self_check,
            };
            cmd_prove(&file, &config, &out, format)
        }
        Command::Eval {
            file,
            name,
            args,
            property,
            quant_range,
        } => cmd_eval(&file, &name, &args, property, quant_range),
        Command::Report { out, format } => cmd_report(&out, format),
    };
    ExitCode::from(code)
}

fn fail(e: &PipelineError) -> u8 {
    eprintln!("{e}");
    match e {
        PipelineError::Diagnostics { .. } | PipelineError::Status(_) => DIAGNOSTICS,
        PipelineError::Read { .. } | PipelineError::Write { .. } | PipelineError::Solver(_) => IO,
    }
}

fn cmd_check(files: &[PathBuf]) -> u8 {
    let mut worst = OK;
    for f in files {
        if let Err(e) = pipeline::load(f) {
            worst = worst.max(fail(&e));
        }
    }
    worst
}

fn write(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(|source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn stem(file: &Path) -> String {
    file.file_stem()
        .map_or_else(|| "out".to_string(), |s| s.to_string_lossy().into_owned())
}

fn cmd_transform(file: &Path, out: &Path) -> u8 {
    let result = pipeline::load(file).and_then(|checked| {
        let output = transform(&checked);
        create_dir(out)?;
        let program = out.join(format!("{}.relc", stem(file)));
        write(&program, &print(&output.program))?;
        let links = serde_json::to_string_pretty(&output.links).expect("links serialize");
        write(&out.join(format!("{}.links.json", stem(file))), &links)?;
        say(&program.display().to_string());
        Ok(())
    });
    result.map_or_else(|e| fail(&e), |()| OK)
}

fn cmd_prove(file: &Path, config: &ProveConfig, out: &Path, format: Format) -> u8 {
    let run = match pipeline::load(file).and_then(|c| pipeline::prove(&c, config)) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let rows = run.report();
    let saved = create_dir(out)
        .and_then(|()| {
            let json = serde_json::to_string_pretty(&rows).expect("report serializes");
            write(&out.join(REPORT_FILE), &json)
        })
        .and_then(|()| {
            let json = serde_json::to_string_pretty(&run.records).expect("records serialize");
            write(&out.join(VCS_FILE), &json)
        });
    if let Err(e) = saved {
        return fail(&e);
    }
    print_report(&rows, format);
    for r in &run.self_check {
        eprintln!(
            "warning: wrapper '{}' disagrees with direct calls on {} of {} samples; its results are not trustworthy",
            r.wrapper, r.mismatch_count, r.accepted
        );
        if let Some(m) = r.mismatches.first() {
            eprintln!("  first: {}", m.detail);
        }
    }
    match run.outcome() {
        Outcome::Refuted => INVALID,
        Outcome::Open => OPEN,
        Outcome::AllHold if !run.self_check.is_empty() => OPEN,
        Outcome::AllHold => OK,
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn say(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_report(rows: &[ReportRow], format: Format) {
    match format {
        Format::Json => say(&serde_json::to_string_pretty(rows).expect("report serializes")),
        Format::Text => say(report::text(rows).trim_end()),
    }
}

fn cmd_eval(file: &Path, name: &str, args: &[BigInt], property: bool, quant_range: (i64, i64)) -> u8 {
    let checked = match pipeline::load(file) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let program = checked.program();
    let result = if property {
        let Some((_, prop)) = program.relational_properties().find(|(_, p)| p.name == name) else {
            eprintln!("error: no relational property named '{name}'");
            return DIAGNOSTICS;
        };
        eval_predicate(program, &prop.predicate(), &ExactEnv::new(), quant_range).map(|b| b.to_string())
    } else {
        let config = InterpConfig {
            quant_range,
            ..InterpConfig::default()
        };
        ExactInterp::with_config(program, config)
            .call(name, args)
            .map(|v| v.to_string())
    };
    match result {
        Ok(v) => {
            say(&v);
            OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            DIAGNOSTICS
        }
    }
}

fn cmd_report(out: &Path, format: Format) -> u8 {
    let path = out.join(REPORT_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}; run `relprove prove` first", path.display());
            return IO;
        }
    };
    match serde_json::from_str::<Vec<ReportRow>>(&text) {
        Ok(rows) => {
            print_report(&rows, format);
            OK
        }
        Err(e) => {
            eprintln!("error: {} is not a relprove report: {e}", path.display());
            IO
        }
    }
}
