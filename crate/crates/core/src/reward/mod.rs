//! Sandboxed reward programs.
//!
//! A program is a list of named terms, each an expression over a fixed
//! feature catalog, combined linearly with non-negative weights:
//!
//! ```text
//! stage 2
//! term height { height } @ 1.0
//! term upright { torso_uprightness - 0.5 * abs(joint_velocity(2)) } @ 0.5
//! term forward { forward_velocity } @ 2.0
//! ```

mod ast;
mod eval;
mod features;
mod parser;
mod program;
mod weights;

pub use ast::{BinOp, Expr, Func};
pub use eval::{eval_step_reward, probe_eval, EvalError, ProbeError, ProbeReport, StepReward, PROBE_PERTURBATIONS};
pub use features::{wrap_angle, Feature, FeatureError, FeatureFrame, FeatureInfo, Target, TaskContext, FEATURE_CATALOG};
pub use parser::{parse_expr, parse_program, ParseError, ParseErrorKind};
pub use program::{term_template, RewardProgram, RewardTerm, TermTemplate, TERM_TEMPLATES};
pub use weights::{weight_matrix, WeightMatrix};

/// Human-readable catalog used in prompts and docs.
pub fn catalog_summary() -> String {
    let mut s = String::from("Features:\n");
    for f in FEATURE_CATALOG {
        let sig = if f.indexed { format!("{}(i)", f.name) } else { f.name.to_string() };
        s.push_str(&format!("- {sig}: {}\n", f.description));
    }
    s.push_str("Operators: + - * / (x/0 evaluates to 0), comparisons < <= > >= == != (1 or 0)\n");
    s.push_str("Functions: abs(x), min(a, b), max(a, b), exp(x), tanh(x), clamp(x, lo, hi)\n");
    s.push_str("Standard terms:\n");
    for t in TERM_TEMPLATES {
        s.push_str(&format!("- {} = {{ {} }}: {}\n", t.name, t.expr, t.description));
    }
    s
}
