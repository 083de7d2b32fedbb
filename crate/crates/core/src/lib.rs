pub mod ast;
pub mod check;
pub mod diag;
pub mod frontend;
pub mod ids;
pub mod interp;
pub mod logic;
pub mod pipeline;
pub mod smt;
pub mod status;
pub mod transform;
pub mod vcgen;

/// Interpreter over exact integers, the reference semantics.
pub type ExactInterp<'p> = interp::Interp<'p, num_bigint::BigInt>;
/// Interpreter over `i64`, reporting overflow instead of wrapping.
pub type FastInterp<'p> = interp::Interp<'p, i64>;
pub type ExactEnv = interp::Env<num_bigint::BigInt>;
pub type FastEnv = interp::Env<i64>;
