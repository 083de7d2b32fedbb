//! Solver subprocess driver.
//!
//! The script goes to the solver's stdin; `(get-model)` follows only after
//! a `sat` answer. A reader thread forwards stdout lines so the driver can
//! wait with a deadline. Every spawned process is killed if still running
//! and always waited for.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use serde::Serialize;

use super::encode::SmtScript;
use super::sexp::{self, Sexp};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const SOLVER_ENV: &str = "RELPROVE_SOLVER";
const CANDIDATES: &[&str] = &["z3", "cvc5"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "result", content = "detail")]
pub enum VerdictKind {
    Unsat,
    Sat,
    Unknown,
    Timeout,
    SolverError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverVerdict {
    pub result: VerdictKind,
    /// Integer constants of the model; present only for `sat`.
    pub model: Option<Vec<(String, BigInt)>>,
    pub wall_time: Duration,
    /// Name of the solver that produced the verdict.
    pub solver: String,
}

impl SolverVerdict {
    pub fn is_unsat(&self) -> bool {
        self.result == VerdictKind::Unsat
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub timeout: Duration,
    /// Replaces the default arguments when non-empty.
    pub extra_args: Vec<String>,
}

impl SolverConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SolverConfig {
            path: path.into(),
            timeout: DEFAULT_TIMEOUT,
            extra_args: Vec::new(),
        }
    }

    fn name(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.display().to_string())
    }

    fn args(&self) -> Vec<String> {
        if !self.extra_args.is_empty() {
            return self.extra_args.clone();
        }
        let name = self.name();
        if name.starts_with("z3") {
            vec!["-in".into(), "-smt2".into()]
        } else if name.starts_with("cvc") {
            vec!["--lang=smt2".into(), "--incremental".into()]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("solver executable not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot start solver {path}: {source}")]
    Spawn {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Resolves the solver: explicit path, then `RELPROVE_SOLVER`, then the
/// first of `z3`, `cvc5` on `PATH`.
pub fn discover_solver(explicit: Option<&Path>) -> Result<PathBuf, String> {
    if let Some(p) = explicit {
        return locate(p).ok_or_else(|| format!("solver '{}' not found", p.display()));
    }
    if let Some(p) = std::env::var_os(SOLVER_ENV).filter(|v| !v.is_empty()) {
        let p = PathBuf::from(p);
        return locate(&p)
            .ok_or_else(|| format!("solver '{}' from {SOLVER_ENV} not found", p.display()));
    }
    CANDIDATES
        .iter()
        .find_map(|c| which::which(c).ok())
        .ok_or_else(|| {
            format!(
                "no SMT solver found: install z3 or cvc5 on PATH, set {SOLVER_ENV}, or pass --solver <path>"
            )
        })
}

fn locate(p: &Path) -> Option<PathBuf> {
    if p.components().count() > 1 {
        p.is_file().then(|| p.to_path_buf())
    } else {
        which::which(p).ok()
    }
}

enum Wait {
    Line(String),
    Eof,
    Timeout,
}

struct Session {
    child: Child,
    /// Feeds a writer thread, so a solver that stops reading cannot block
    /// the driver. Dropping it closes the solver's stdin.
    input: Option<Sender<String>>,
    lines: Receiver<String>,
    stderr: Receiver<String>,
    deadline: Instant,
}

impl Session {
    fn next_line(&self) -> Wait {
        let now = Instant::now();
        if now >= self.deadline {
            return Wait::Timeout;
        }
        match self.lines.recv_timeout(self.deadline - now) {
            Ok(l) => Wait::Line(l),
            Err(RecvTimeoutError::Timeout) => Wait::Timeout,
            Err(RecvTimeoutError::Disconnected) => Wait::Eof,
        }
    }

    fn send(&mut self, text: &str) {
        if let Some(input) = &self.input {
            // A solver that already exited shows up as EOF on stdout.
            let _ = input.send(text.to_string());
        }
    }

    /// Asks the solver to exit and reaps it; kills it at the deadline.
    fn finish(mut self, graceful: bool) -> String {
        if graceful {
            self.send("(exit)\n");
            self.input = None;
            let grace = self.deadline.min(Instant::now() + Duration::from_secs(1));
            while Instant::now() < grace {
                match self.child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) => thread::sleep(Duration::from_millis(2)),
                    Err(_) => break,
                }
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.input = None;
        // A grandchild may hold stderr open; do not wait for it long.
        self.stderr
            .recv_timeout(Duration::from_millis(200))
            .unwrap_or_default()
    }
}

fn excerpt(s: &str) -> String {
    let s = s.trim();
    match s.char_indices().nth(400) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

pub fn run_solver(script: &SmtScript, config: &SolverConfig) -> Result<SolverVerdict, SolverError> {
    let start = Instant::now();
    let mut child = Command::new(&config.path)
        .args(config.args())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SolverError::NotFound(config.path.clone()),
            _ => SolverError::Spawn {
                path: config.path.clone(),
                source: e,
            },
        })?;

    let mut stdin = child.stdin.take().expect("piped");
    let (in_tx, in_rx) = mpsc::channel::<String>();
    thread::spawn(move || {
        for chunk in in_rx {
            if stdin.write_all(chunk.as_bytes()).and_then(|_| stdin.flush()).is_err() {
                break;
            }
        }
    });
    let stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let (err_tx, err_rx) = mpsc::channel();
    thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        let _ = err_tx.send(s);
    });
    let mut session = Session {
        child,
        input: Some(in_tx),
        lines: rx,
        stderr: err_rx,
        deadline: start + config.timeout,
    };
    session.send(&script.text);

    let verdict = |result, model| SolverVerdict {
        result,
        model,
        wall_time: start.elapsed(),
        solver: config.name(),
    };

    let mut errors = Vec::new();
    let answer = loop {
        match session.next_line() {
            Wait::Line(l) => {
                let l = l.trim();
                match l {
                    "sat" | "unsat" | "unknown" => break l.to_string(),
                    _ if l.starts_with("(error") => errors.push(l.to_string()),
                    _ => {}
                }
            }
            Wait::Timeout => {
                session.finish(false);
                return Ok(verdict(VerdictKind::Timeout, None));
            }
            Wait::Eof => {
                let stderr = session.finish(false);
                let mut detail = errors.join("\n");
                if !stderr.trim().is_empty() {
                    detail.push_str(&stderr);
                }
                if detail.trim().is_empty() {
                    detail = "solver exited without a verdict".into();
                }
                return Ok(verdict(VerdictKind::SolverError(excerpt(&detail)), None));
            }
        }
    };
    if !errors.is_empty() {
        session.finish(true);
        return Ok(verdict(VerdictKind::SolverError(excerpt(&errors.join("\n"))), None));
    }
    match answer.as_str() {
        "unsat" => {
            session.finish(true);
            Ok(verdict(VerdictKind::Unsat, None))
        }
        "unknown" => {
            session.finish(true);
            Ok(verdict(VerdictKind::Unknown, None))
        }
        _ => {
            session.send("(get-model)\n");
            let mut text = String::new();
            let mut depth = 0i64;
            loop {
                match session.next_line() {
                    Wait::Line(l) => {
                        depth += sexp::depth_delta(&l);
                        text.push_str(&l);
                        text.push('\n');
                        if depth <= 0 && !text.trim().is_empty() {
                            break;
                        }
                    }
                    Wait::Timeout => {
                        session.finish(false);
                        return Ok(verdict(VerdictKind::Timeout, None));
                    }
                    Wait::Eof => break,
                }
            }
            session.finish(true);
            let model = parse_model(&text).unwrap_or_default();
            Ok(verdict(VerdictKind::Sat, Some(model)))
        }
    }
}

/// Integer constants from a `(get-model)` response, in the solver's order.
pub fn parse_model(text: &str) -> Result<Vec<(String, BigInt)>, String> {
    let mut out = Vec::new();
    for top in sexp::parse(text)? {
        let Some(items) = top.list() else { continue };
        for def in items {
            let Some(parts) = def.list() else { continue };
            let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), Sexp::Atom(sort), value] =
                parts
            else {
                continue;
            };
            if kw != "define-fun" || !params.is_empty() || sort != "Int" {
                continue;
            }
            if let Some(v) = int_value(value) {
                out.push((name.clone(), v));
            }
        }
    }
    Ok(out)
}

fn int_value(e: &Sexp) -> Option<BigInt> {
    match e {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => int_value(inner).map(|v| -v),
            _ => None,
        },
    }
}
