//! Comparing rollouts and reviewing the best one.
//!
//! [`OracleJudge`] scores trajectories with fixed task metrics and is fully
//! deterministic. [`EndpointJudge`] renders frames and asks a multimodal
//! chat endpoint.

mod endpoint;
mod oracle;

pub use endpoint::{parse_feedback, parse_selection, EndpointJudge, DEFAULT_PARSE_RETRIES};
pub use oracle::{
    locomotion_report, manipulation_errors, oracle_score, LocomotionReport, OracleJudge, OracleThresholds,
    FALL_HEIGHT,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::environments::TaskId;
use crate::render::RenderError;
use crate::reward::{parse_expr, term_template, RewardProgram};
use crate::transport::TransportError;
use crate::{Task, TaskContext, Trajectory};

/// What the motion should look like, bound to a task for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionDescription {
    pub text: String,
    pub task_id: String,
    /// How the body is referred to in prompts.
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub focus: String,
}

impl MotionDescription {
    pub fn for_task(task: &Task) -> Self {
        Self {
            text: task.spec.motion_description.clone(),
            task_id: task.id().to_string(),
            body: task.spec.body.clone(),
            focus: task.spec.focus.clone(),
        }
    }

    pub fn task(&self) -> Result<TaskId, JudgeError> {
        if self.text.trim().is_empty() {
            return Err(JudgeError::EmptyDescription);
        }
        self.task_id.parse().map_err(|_| JudgeError::UnknownTask(self.task_id.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::First => "first",
            Choice::Second => "second",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub choice: Choice,
    pub justification: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Add,
    Remove,
    Increase,
    Decrease,
}

impl Action {
    pub fn from_word(w: &str) -> Option<Action> {
        Some(match w.to_ascii_lowercase().as_str() {
            "add" => Action::Add,
            "remove" => Action::Remove,
            "increase" => Action::Increase,
            "decrease" => Action::Decrease,
            _ => return None,
        })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Add => "add",
            Action::Remove => "remove",
            Action::Increase => "increase",
            Action::Decrease => "decrease",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub term_name: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_weight: Option<f64>,
    /// For `add`: a standard term name or an expression over the features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition_hint: Option<String>,
}

impl Suggestion {
    pub fn new(action: Action, term: &str) -> Self {
        Self { term_name: term.into(), action, proposed_weight: None, definition_hint: None }
    }

    /// Adds a standard term under its own name.
    pub fn add_template(term: &str, weight: Option<f64>) -> Self {
        Self { term_name: term.into(), action: Action::Add, proposed_weight: weight, definition_hint: Some(term.into()) }
    }

    /// Checks the suggestion against the program it is meant for.
    pub fn check(&self, program: &RewardProgram) -> Result<(), String> {
        if let Some(w) = self.proposed_weight {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(format!("{}: weight {w} is not a non-negative number", self.term_name));
            }
        }
        match self.action {
            Action::Add => {
                let hint = self.definition_hint.as_deref().unwrap_or("").trim();
                if hint.is_empty() {
                    return Err(format!("add {} has no definition", self.term_name));
                }
                if term_template(hint).is_none() {
                    parse_expr(hint).map_err(|e| format!("add {}: {e}", self.term_name))?;
                }
            }
            _ => {
                if program.position(&self.term_name).is_none() && term_template(&self.term_name).is_none() {
                    return Err(format!("{} {}: no such term", self.action, self.term_name));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Suggestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.action, self.term_name)?;
        if let Some(w) = self.proposed_weight {
            write!(f, " {} {w:?}", if self.action == Action::Add { "at" } else { "to" })?;
        }
        if let Some(h) = &self.definition_hint {
            write!(f, ": {h}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub task_success: bool,
    pub issues: String,
    pub suggestions: Vec<Suggestion>,
}

impl Feedback {
    pub fn check(&self, program: &RewardProgram) -> Result<(), String> {
        self.suggestions.iter().try_for_each(|s| s.check(program))
    }

    /// Plain-text form used in synthesis prompts.
    pub fn to_text(&self) -> String {
        let mut s = format!("SUCCESS: {}\nISSUES: {}\nSUGGESTIONS:\n", if self.task_success { "YES" } else { "NO" }, self.issues);
        for sg in &self.suggestions {
            s.push_str(&format!("- {sg}\n"));
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("unknown task binding `{0}`")]
    UnknownTask(String),
    #[error("motion description is empty")]
    EmptyDescription,
    #[error("cannot judge an empty trajectory")]
    EmptyTrajectory,
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("could not parse the endpoint's answer after {attempts} attempts: {detail}")]
    Parse { attempts: usize, detail: String },
}

/// Compares rollouts and reviews the incumbent.
pub trait Judge: Send + Sync {
    /// `First` when `challenger` should replace `incumbent`. With no incumbent the challenger wins.
    fn compare(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        challenger: &Trajectory,
        incumbent: Option<&Trajectory>,
    ) -> Result<Verdict, JudgeError>;

    fn critique(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        best: &Trajectory,
        program: &RewardProgram,
    ) -> Result<Feedback, JudgeError>;
}

pub(crate) fn no_incumbent() -> Verdict {
    Verdict { choice: Choice::First, justification: "no incumbent yet".into() }
}
