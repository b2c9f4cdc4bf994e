//! Proposing the next reward programs from feedback.
//!
//! [`MockSynthesizer`] is a seeded local search over weights and standard
//! terms. [`EndpointSynthesizer`] asks a chat endpoint for program text and
//! sends rejected programs back with the reason until one validates.

mod endpoint;

pub use endpoint::{extract_program_text, EndpointSynthesizer, DEFAULT_RETRY_BUDGET};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::judge::{Action, Feedback, MotionDescription, Suggestion};
use crate::reward::{parse_expr, parse_program, probe_eval, term_template, weight_matrix, RewardProgram};
use crate::transport::TransportError;
use crate::Task;

pub const DEFAULT_MAX_WEIGHT: f64 = 10.0;
pub const STEP_FACTOR: f64 = 1.5;
pub const JITTER: f64 = 0.1;

pub struct SynthesisContext<'a> {
    pub description: MotionDescription,
    pub task: &'a Task,
    pub feedback: Feedback,
    pub incumbent: RewardProgram,
    /// Incumbent programs of earlier iterations, oldest first.
    pub history: Vec<RewardProgram>,
    pub max_weight: f64,
}

impl SynthesisContext<'_> {
    /// Earlier weights as text rows, one per term.
    pub fn residual_terms(&self) -> String {
        if self.history.is_empty() {
            return "(no earlier rounds)".into();
        }
        let m = weight_matrix(&self.history);
        let mut s = String::new();
        for (name, row) in m.terms.iter().zip(&m.normalized) {
            let cols: Vec<String> = row.iter().map(|w| format!("{w:.3}")).collect();
            s.push_str(&format!("{name}: {}\n", cols.join(" ")));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// The run's starting program.
    Initial,
    Endpoint,
    Mock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub program: RewardProgram,
    pub provenance: Provenance,
    /// Attempts used before the program validated, starting at 1.
    pub attempts: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("proposal {index}: no executable program after {attempts} attempts; last rejection: {reason}")]
    Exhausted { index: usize, attempts: usize, reason: String },
    #[error("n must be at least 1")]
    NoProposals,
}

pub trait Synthesizer: Send + Sync {
    fn propose(&self, ctx: &SynthesisContext<'_>, n: usize, seed: u64) -> Result<Vec<Proposal>, SynthesisError>;
}

/// Accepts a program that parses, evaluates on the task's probe states and
/// keeps every weight in `[0, max_weight]`.
pub fn validate(program: &RewardProgram, task: &Task, max_weight: f64) -> Result<(), String> {
    if let Some((i, w)) = program.weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0 && **w <= max_weight)) {
        return Err(format!("weight bound: term {} has weight {w}, limit is [0, {max_weight}]", program.terms[i].name));
    }
    probe_eval(program, task).map_err(|e| e.to_string())?;
    Ok(())
}

pub fn validate_text(text: &str, task: &Task, max_weight: f64) -> Result<RewardProgram, String> {
    let program = parse_program(text).map_err(|e| e.to_string())?;
    validate(&program, task, max_weight)?;
    Ok(program)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockSynthesizer {
    pub step: f64,
}

impl Default for MockSynthesizer {
    fn default() -> Self {
        Self { step: STEP_FACTOR }
    }
}

/// Index sets applied to variants in order: everything, each suggestion
/// alone, then each leave-one-out set; after that only jitter.
pub fn suggestion_subsets(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut push = |s: Vec<usize>| {
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };
    push((0..k).collect());
    for i in 0..k {
        push(vec![i]);
    }
    for i in 0..k {
        push((0..k).filter(|&j| j != i).collect());
    }
    out.truncate(n);
    while out.len() < n {
        out.push(Vec::new());
    }
    out
}

impl MockSynthesizer {
    /// Applies one suggestion in place. Unusable suggestions are skipped.
    pub fn apply(&self, program: &mut RewardProgram, s: &Suggestion, max_weight: f64) {
        let default_weight = 0.1 * max_weight;
        let pos = program.position(&s.term_name);
        match (s.action, pos) {
            (Action::Increase, Some(i)) => {
                let w = program.weights[i];
                program.weights[i] = if w > 0.0 { w * self.step } else { default_weight }.min(max_weight);
            }
            (Action::Decrease, Some(i)) => program.weights[i] = (program.weights[i] / self.step).max(0.0),
            (Action::Remove, Some(_)) => {
                program.remove(&s.term_name);
            }
            (Action::Add, Some(i)) => {
                let w = s.proposed_weight.unwrap_or(default_weight);
                program.weights[i] = program.weights[i].max(w).min(max_weight);
            }
            (Action::Add, None) | (Action::Increase, None) => {
                let hint = s.definition_hint.as_deref().unwrap_or(&s.term_name);
                let text = term_template(hint).map(|t| t.expr).unwrap_or(hint);
                if let Ok(expr) = parse_expr(text) {
                    let w = s.proposed_weight.unwrap_or(default_weight).clamp(0.0, max_weight);
                    program.push(s.term_name.clone(), expr, w);
                }
            }
            (Action::Decrease | Action::Remove, None) => {}
        }
    }

    fn variant(&self, ctx: &SynthesisContext<'_>, subset: &[usize], rng: &mut ChaCha8Rng) -> RewardProgram {
        let mut p = ctx.incumbent.clone();
        for w in p.weights.iter_mut() {
            let f = 1.0 + rng.random_range(-JITTER..=JITTER);
            *w = (*w * f).clamp(0.0, ctx.max_weight);
        }
        for &i in subset {
            self.apply(&mut p, &ctx.feedback.suggestions[i], ctx.max_weight);
        }
        p
    }
}

impl Synthesizer for MockSynthesizer {
    fn propose(&self, ctx: &SynthesisContext<'_>, n: usize, seed: u64) -> Result<Vec<Proposal>, SynthesisError> {
        if n == 0 {
            return Err(SynthesisError::NoProposals);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subsets = suggestion_subsets(ctx.feedback.suggestions.len(), n);
        Ok(subsets
            .iter()
            .map(|subset| {
                let mut program = self.variant(ctx, subset, &mut rng);
                if validate(&program, ctx.task, ctx.max_weight).is_err() {
                    program = ctx.incumbent.clone();
                }
                Proposal { program, provenance: Provenance::Mock, attempts: 1 }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_order() {
        assert_eq!(suggestion_subsets(0, 3), vec![Vec::<usize>::new(); 3]);
        assert_eq!(suggestion_subsets(1, 3), vec![vec![0], vec![], vec![]]);
        assert_eq!(suggestion_subsets(2, 4), vec![vec![0, 1], vec![0], vec![1], vec![]]);
        assert_eq!(
            suggestion_subsets(3, 8),
            vec![vec![0, 1, 2], vec![0], vec![1], vec![2], vec![1, 2], vec![0, 2], vec![0, 1], vec![]]
        );
    }
}
