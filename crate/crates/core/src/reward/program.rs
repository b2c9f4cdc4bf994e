use std::fmt;

use super::ast::{write_number, Expr};

#[derive(Debug, Clone, PartialEq)]
pub struct RewardTerm {
    pub name: String,
    pub expr: Expr,
}

/// Linear reward `r = Σₖ wₖ rₖ` over named terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardProgram {
    pub terms: Vec<RewardTerm>,
    pub weights: Vec<f64>,
    /// Iteration of the search that produced this program.
    pub stage_id: usize,
}

impl RewardProgram {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }

    pub fn weight(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.weights[i])
    }

    pub fn push(&mut self, name: impl Into<String>, expr: Expr, weight: f64) {
        self.terms.push(RewardTerm { name: name.into(), expr });
        self.weights.push(weight);
    }

    pub fn remove(&mut self, name: &str) -> bool {
        match self.position(name) {
            Some(i) => {
                self.terms.remove(i);
                self.weights.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { weights: self.weights.iter().map(|w| w * factor).collect(), ..self.clone() }
    }

    /// Structural checks the parser also enforces, for programs built in code.
    pub fn check(&self) -> Result<(), String> {
        if self.terms.len() != self.weights.len() {
            return Err("one weight per term required".into());
        }
        for (i, t) in self.terms.iter().enumerate() {
            if self.terms[..i].iter().any(|o| o.name == t.name) {
                return Err(format!("duplicate term name `{}`", t.name));
            }
            let w = self.weights[i];
            if !(w >= 0.0) || !w.is_finite() {
                return Err(format!("term `{}` has invalid weight {w}", t.name));
            }
        }
        Ok(())
    }

    /// Canonical text, one term per line.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_number(f, self.0)
    }
}

impl fmt::Display for RewardProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stage {}", self.stage_id)?;
        for (t, w) in self.terms.iter().zip(&self.weights) {
            writeln!(f, "term {} {{ {} }} @ {}", t.name, t.expr, Num(*w))?;
        }
        Ok(())
    }
}

/// Named building block the feedback rules and the local-search synthesizer
/// refer to. Penalties are negated inside the expression so weights stay non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermTemplate {
    pub name: &'static str,
    pub expr: &'static str,
    pub description: &'static str,
}

pub const TERM_TEMPLATES: &[TermTemplate] = &[
    TermTemplate { name: "height", expr: "height", description: "keep the torso high above the ground" },
    TermTemplate { name: "balance", expr: "-balance", description: "keep the center of mass over the feet" },
    TermTemplate { name: "forward", expr: "forward_velocity", description: "move forward" },
    TermTemplate { name: "progress", expr: "forward_distance", description: "distance covered so far" },
    TermTemplate { name: "torso_uprightness", expr: "torso_uprightness", description: "keep the torso upright" },
    TermTemplate { name: "effort", expr: "-effort", description: "penalize muscle effort" },
    TermTemplate { name: "smoothness", expr: "-control_smoothness", description: "penalize abrupt command changes" },
    TermTemplate { name: "foot_clearance", expr: "min(foot_clearance, 0.1)", description: "lift the swing foot" },
    TermTemplate { name: "step_symmetry", expr: "-step_symmetry", description: "keep the feet symmetric about the center of mass" },
    TermTemplate { name: "target_position", expr: "-target_position_error", description: "bring the object to the target position" },
    TermTemplate { name: "target_orientation", expr: "-target_orientation_error", description: "match the target orientation" },
];

pub fn term_template(name: &str) -> Option<&'static TermTemplate> {
    TERM_TEMPLATES.iter().find(|t| t.name == name)
}
