//! Differential check of a wrapper against direct evaluation.
//!
//! For random values of the property's binders, running the wrapper must
//! record exactly the values the inlined calls return when evaluated
//! directly, and its final assert must agree with the relational
//! predicate evaluated with real calls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EvalError, Env, Interp, Scalar};
use crate::ast::Ident;
use crate::transform::WrapperInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Accepted samples wanted.
    pub samples: usize,
    pub seed: u64,
    /// Inclusive range binders are drawn from; a quarter of the draws
    /// come from [-3, 3] instead so that equalities and zero show up.
    pub range: (i64, i64),
    /// Draws allowed per wanted sample before giving up on a restrictive
    /// precondition.
    pub attempts_per_sample: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            samples: 1000,
            seed: 0,
            range: (-1000, 1000),
            attempts_per_sample: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub inputs: Vec<(Ident, String)>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub property: Ident,
    pub wrapper: Ident,
    /// Samples satisfying the wrapper's requires, all compared.
    pub accepted: usize,
    /// Samples discarded because they violate the wrapper's requires.
    pub rejected: usize,
    pub mismatch_count: usize,
    /// The first few mismatches.
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn passed(&self, wanted: usize) -> bool {
        self.mismatch_count == 0 && self.accepted >= wanted
    }
}

const KEPT_MISMATCHES: usize = 16;

fn draw<S: Scalar>(rng: &mut ChaCha8Rng, range: (i64, i64)) -> S {
    let v = if rng.gen_ratio(1, 4) {
        rng.gen_range(-3..=3)
    } else {
        rng.gen_range(range.0..=range.1)
    };
    S::from_i64(v).expect("sample range fits every scalar type")
}

/// Compares one sample; `Err` describes the disagreement.
fn compare<S: Scalar>(
    interp: &Interp<'_, S>,
    info: &WrapperInfo,
    args: &[S],
) -> Result<(), String> {
    let program = interp.program;
    let prop = program
        .relational_properties()
        .find(|(_, p)| p.name == info.property)
        .map(|(_, p)| p)
        .ok_or_else(|| format!("property '{}' not found", info.property))?;
    let wrapper = program
        .function(&info.wrapper)
        .ok_or_else(|| format!("wrapper '{}' not found", info.wrapper))?;
    let binders = Env::from_bindings(wrapper.params.iter().cloned().zip(args.iter().cloned()));

    // Direct evaluation of each recorded call, in wrapper order.
    let mut direct = binders.clone();
    let mut direct_error: Option<EvalError> = None;
    let mut premise = true;
    for call in &info.calls {
        let values: Result<Vec<S>, _> = call.args.iter().map(|a| interp.int(a, &direct)).collect();
        let result = values.and_then(|vals| {
            if let Some(f) = program.function(&call.callee) {
                let env = Env::from_bindings(f.params.iter().cloned().zip(vals.iter().cloned()));
                for r in &f.contract.requires {
                    premise &= interp.bool(&r.pred, &env)?;
                }
            }
            interp.call(&call.callee, &vals)
        });
        match result {
            Ok(v) => direct.bind(call.result.clone(), v),
            Err(e) => {
                direct_error = Some(e);
                break;
            }
        }
    }

    let run = match (interp.run(&info.wrapper, args), direct_error) {
        (Err(a), Some(b)) if a == b => return Ok(()),
        (Err(a), Some(b)) => return Err(format!("wrapper failed with '{a}', direct evaluation with '{b}'")),
        (Err(a), None) => return Err(format!("wrapper failed with '{a}', direct evaluation succeeded")),
        (Ok(_), Some(b)) => return Err(format!("direct evaluation failed with '{b}', wrapper succeeded")),
        (Ok(run), None) => run,
    };
    for call in &info.calls {
        let expected = direct.get(&call.result).map_err(|e| e.to_string())?;
        match run.locals.get(&call.result) {
            Some(v) if *v == expected => {}
            Some(v) => {
                return Err(format!(
                    "{} = {v} in the wrapper but {}(...) = {expected}",
                    call.result, call.callee
                ))
            }
            None => return Err(format!("{} not recorded by the wrapper", call.result)),
        }
    }

    let asserted = run
        .asserts
        .iter()
        .rev()
        .find(|a| a.label.as_deref() == Some(info.property.as_str()))
        .ok_or("wrapper assert not executed")?
        .holds
        .clone();
    let relational = interp.bool(&prop.body, &binders);
    match (asserted, relational) {
        (Ok(a), Ok(r)) if a == (!premise || r) => Ok(()),
        (Ok(a), Ok(r)) => Err(format!(
            "wrapper assert is {a} but the relational predicate is {r} (callee preconditions {premise})"
        )),
        (Err(a), Err(r)) if a == r => Ok(()),
        (a, r) => Err(format!("wrapper assert gave {a:?}, relational predicate gave {r:?}")),
    }
}

/// Runs the check for one wrapper built by the transform.
pub fn differential<S: Scalar>(
    interp: &Interp<'_, S>,
    info: &WrapperInfo,
    config: &OracleConfig,
) -> OracleReport {
    let mut report = OracleReport {
        property: info.property.clone(),
        wrapper: info.wrapper.clone(),
        accepted: 0,
        rejected: 0,
        mismatch_count: 0,
        mismatches: Vec::new(),
    };
    let Some(wrapper) = interp.program.function(&info.wrapper) else {
        report.mismatch_count = 1;
        report.mismatches.push(Mismatch {
            inputs: Vec::new(),
            detail: format!("wrapper '{}' not found", info.wrapper),
        });
        return report;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let budget = config.samples.saturating_mul(config.attempts_per_sample).max(1);
    for _ in 0..budget {
        if report.accepted >= config.samples {
            break;
        }
        let args: Vec<S> = wrapper.params.iter().map(|_| draw(&mut rng, config.range)).collect();
        let env = Env::from_bindings(wrapper.params.iter().cloned().zip(args.iter().cloned()));
        let admitted = wrapper
            .contract
            .requires
            .iter()
            .all(|r| interp.bool(&r.pred, &env) == Ok(true));
        if !admitted {
            report.rejected += 1;
            continue;
        }
        report.accepted += 1;
        if let Err(detail) = compare(interp, info, &args) {
            report.mismatch_count += 1;
            if report.mismatches.len() < KEPT_MISMATCHES {
                report.mismatches.push(Mismatch {
                    inputs: wrapper
                        .params
                        .iter()
                        .cloned()
                        .zip(args.iter().map(|a| a.to_string()))
                        .collect(),
                    detail,
                });
            }
        }
    }
    report
}
