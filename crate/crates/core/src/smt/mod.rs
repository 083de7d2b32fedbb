//! SMT-LIB encoding of verification conditions and the solver driver.

mod encode;
pub mod sexp;
mod solver;

pub use encode::{encode, symbol, term, SmtScript};
pub use solver::{
    discover_solver, parse_model, run_solver, SolverConfig, SolverError, SolverVerdict,
    VerdictKind, DEFAULT_TIMEOUT, SOLVER_ENV,
};
