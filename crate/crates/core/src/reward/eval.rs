use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::{BinOp, Expr, Func};
use super::features::{FeatureError, FeatureFrame};
use super::program::RewardProgram;
use crate::environments::Task;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct StepReward<T> {
    pub total: T,
    pub per_term: Vec<T>,
    /// Divisions by zero that were replaced with 0.
    pub guard_hits: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("term `{term}` evaluated to a non-finite value")]
    NonFinite { term: String },
    #[error("term `{term}`: {source}")]
    Feature { term: String, source: FeatureError },
}

impl EvalError {
    pub fn term(&self) -> &str {
        match self {
            EvalError::NonFinite { term } | EvalError::Feature { term, .. } => term,
        }
    }
}

enum ExprError {
    NonFinite,
    Feature(FeatureError),
}

fn truth<T: Real>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

fn eval_expr<T: Real>(e: &Expr, frame: &FeatureFrame<'_, T>, guards: &mut usize) -> Result<T, ExprError> {
    let v = match e {
        Expr::Num(x) => T::lit(*x),
        Expr::Feature(f) => frame.value(*f).map_err(ExprError::Feature)?,
        Expr::Neg(x) => -eval_expr(x, frame, guards)?,
        Expr::Binary(op, l, r) => {
            let a = eval_expr(l, frame, guards)?;
            let b = eval_expr(r, frame, guards)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == T::zero() {
                        *guards += 1;
                        T::zero()
                    } else {
                        a / b
                    }
                }
                BinOp::Lt => truth(a < b),
                BinOp::Le => truth(a <= b),
                BinOp::Gt => truth(a > b),
                BinOp::Ge => truth(a >= b),
                BinOp::Eq => truth(a == b),
                BinOp::Ne => truth(a != b),
            }
        }
        Expr::Call(func, args) => {
            let mut vals = [T::zero(); 3];
            for (slot, a) in vals.iter_mut().zip(args) {
                *slot = eval_expr(a, frame, guards)?;
            }
            match func {
                Func::Abs => vals[0].abs(),
                Func::Min => vals[0].min(vals[1]),
                Func::Max => vals[0].max(vals[1]),
                Func::Exp => vals[0].exp(),
                Func::Tanh => vals[0].tanh(),
                Func::Clamp => vals[0].max(vals[1]).min(vals[2]),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NonFinite)
    }
}

/// Evaluates every term on one step and forms `Σₖ wₖ rₖ`.
///
/// Pure: no I/O, no shared state, cost linear in the total expression size.
pub fn eval_step_reward<T: Real>(
    program: &RewardProgram,
    frame: &FeatureFrame<'_, T>,
) -> Result<StepReward<T>, EvalError> {
    let mut guard_hits = 0;
    let mut per_term = Vec::with_capacity(program.terms.len());
    let mut total = T::zero();
    for (term, w) in program.terms.iter().zip(&program.weights) {
        let v = eval_expr(&term.expr, frame, &mut guard_hits).map_err(|e| match e {
            ExprError::NonFinite => EvalError::NonFinite { term: term.name.clone() },
            ExprError::Feature(source) => EvalError::Feature { term: term.name.clone(), source },
        })?;
        total = total + T::lit(*w) * v;
        per_term.push(v);
    }
    if !total.is_finite() {
        return Err(EvalError::NonFinite { term: "<total>".into() });
    }
    Ok(StepReward { total, per_term, guard_hits })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("probe state {state_index}: {source}")]
pub struct ProbeError {
    pub state_index: usize,
    pub source: EvalError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProbeReport {
    pub states_checked: usize,
    pub guard_hits: usize,
}

pub const PROBE_PERTURBATIONS: usize = 10;
const PROBE_SEED: u64 = 0x05ee_d0f9_a0be;

/// Evaluates the program on the task's initial state and ten perturbed
/// copies with random controls. Fails on the first non-finite term.
pub fn probe_eval<T: Real>(program: &RewardProgram, task: &Task<T>) -> Result<ProbeReport, ProbeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let du = task.morphology().n_muscles();
    let mut report = ProbeReport::default();
    let zero = vec![T::zero(); du];
    for k in 0..=PROBE_PERTURBATIONS {
        let mut state = task.initial_state.clone();
        let mut u = zero.clone();
        let mut prev = zero.clone();
        if k > 0 {
            for q in state.joints.q.iter_mut() {
                *q = *q + T::lit(rng.random_range(-0.2..0.2));
            }
            for v in state.joints.qdot.iter_mut() {
                *v = *v + T::lit(rng.random_range(-1.0..1.0));
            }
            for (a, b) in u.iter_mut().zip(prev.iter_mut()) {
                *a = T::lit(rng.random_range(0.0..1.0));
                *b = T::lit(rng.random_range(0.0..1.0));
            }
        }
        let frame = FeatureFrame::new(&task.context, &state, &u, Some(&prev));
        let r = eval_step_reward(program, &frame).map_err(|source| ProbeError { state_index: k, source })?;
        report.states_checked += 1;
        report.guard_hits += r.guard_hits;
    }
    Ok(report)
}
