use serde::{Deserialize, Serialize};

use super::{no_incumbent, Action, Choice, Feedback, Judge, JudgeError, MotionDescription, Suggestion, Verdict};
use crate::environments::TaskId;
use crate::reward::{wrap_angle, Feature, FeatureFrame, RewardProgram};
use crate::{SystemState, TaskContext, Trajectory};

/// Root-body height above the ground below which the walker counts as fallen (m).
pub const FALL_HEIGHT: f64 = 0.45;
/// Weight of the orientation error in the manipulation score (m/rad).
pub const ORIENTATION_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleThresholds {
    /// Displacement that counts as success (m).
    pub distance: f64,
    /// Manipulation score that counts as success.
    pub pose_score: f64,
    /// Largest acceptable root tilt (rad).
    pub lean: f64,
    /// Mean squared command per actuator considered wasteful.
    pub effort: f64,
}

impl Default for OracleThresholds {
    fn default() -> Self {
        Self { distance: 5.0, pose_score: -0.05, lean: 0.3, effort: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocomotionReport {
    /// Root displacement up to the end or the fall (m).
    pub displacement: f64,
    pub fall_time: Option<f64>,
    pub max_lean: f64,
    pub mean_effort: f64,
}

fn root_pose(ctx: &TaskContext, s: &SystemState) -> ([f64; 2], f64) {
    let m = &ctx.morphology;
    let kin = m.kinematics(s.q(), s.qdot());
    (m.com_position(&kin, 0), kin.angle[0])
}

fn states(traj: &Trajectory) -> impl Iterator<Item = (f64, &SystemState)> {
    std::iter::once((0.0, &traj.initial))
        .chain(traj.steps.iter().enumerate().map(|(i, s)| ((i + 1) as f64 * traj.control_dt, &s.state)))
}

pub fn locomotion_report(traj: &Trajectory, ctx: &TaskContext) -> LocomotionReport {
    let x0 = root_pose(ctx, &traj.initial).0[0];
    let mut out = LocomotionReport { displacement: 0.0, fall_time: None, max_lean: 0.0, mean_effort: 0.0 };
    for (t, s) in states(traj) {
        let (p, angle) = root_pose(ctx, s);
        out.displacement = p[0] - x0;
        out.max_lean = out.max_lean.max(wrap_angle(angle).abs());
        if p[1] - ctx.terrain.height(p[0]) < FALL_HEIGHT {
            out.fall_time = Some(t);
            break;
        }
    }
    let n = ctx.morphology.n_muscles().max(1) as f64;
    if !traj.is_empty() {
        let total: f64 = traj.steps.iter().map(|s| s.controls.iter().map(|u| u * u).sum::<f64>() / n).sum();
        out.mean_effort = total / traj.len() as f64;
    }
    out
}

/// Position (m) and orientation (rad) errors of the object at the final step.
pub fn manipulation_errors(traj: &Trajectory, ctx: &TaskContext) -> (f64, f64) {
    let s = traj.last_state();
    let u = vec![0.0; ctx.morphology.n_muscles()];
    let f = FeatureFrame::new(ctx, s, &u, None);
    (
        f.value(Feature::TargetPositionError).unwrap_or(f64::INFINITY),
        f.value(Feature::TargetOrientationError).unwrap_or(f64::INFINITY),
    )
}

/// Walking tasks: forward displacement of the root body, frozen at the
/// first fall. Manipulation: `−(position error + 0.5 · orientation error)`
/// at the final step.
pub fn oracle_score(desc: &MotionDescription, traj: &Trajectory, ctx: &TaskContext) -> Result<f64, JudgeError> {
    let task = desc.task()?;
    if traj.is_empty() {
        return Err(JudgeError::EmptyTrajectory);
    }
    Ok(score_for(task, traj, ctx))
}

fn score_for(task: TaskId, traj: &Trajectory, ctx: &TaskContext) -> f64 {
    let s = if task.is_locomotion() {
        locomotion_report(traj, ctx).displacement
    } else {
        let (p, o) = manipulation_errors(traj, ctx);
        -(p + ORIENTATION_WEIGHT * o)
    };
    // Diverged rollouts rank below everything.
    if s.is_finite() {
        s
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleJudge {
    pub thresholds: OracleThresholds,
}

impl OracleJudge {
    pub fn new(thresholds: OracleThresholds) -> Self {
        Self { thresholds }
    }
}

/// `Increase` when the program has the term, otherwise add the standard term.
fn strengthen(program: &RewardProgram, term: &str, add_weight: Option<f64>) -> Suggestion {
    if program.position(term).is_some() {
        Suggestion::new(Action::Increase, term)
    } else {
        Suggestion::add_template(term, add_weight)
    }
}

impl Judge for OracleJudge {
    fn compare(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        challenger: &Trajectory,
        incumbent: Option<&Trajectory>,
    ) -> Result<Verdict, JudgeError> {
        let a = oracle_score(desc, challenger, ctx)?;
        let Some(incumbent) = incumbent else { return Ok(no_incumbent()) };
        let b = oracle_score(desc, incumbent, ctx)?;
        let choice = if a > b { Choice::First } else { Choice::Second };
        Ok(Verdict { choice, justification: format!("score {a:.4} vs {b:.4}") })
    }

    fn critique(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        best: &Trajectory,
        program: &RewardProgram,
    ) -> Result<Feedback, JudgeError> {
        let task = desc.task()?;
        let score = oracle_score(desc, best, ctx)?;
        let th = &self.thresholds;
        let mut issues = Vec::new();
        let mut suggestions = Vec::new();
        if task.is_locomotion() {
            let r = locomotion_report(best, ctx);
            if let Some(t) = r.fall_time {
                issues.push(format!("fell at t={t:.2} s after {:.2} m", r.displacement));
                suggestions.push(strengthen(program, "balance", None));
                suggestions.push(strengthen(program, "height", None));
            }
            if r.max_lean > th.lean {
                issues.push(format!("torso leaned up to {:.2} rad", r.max_lean));
                suggestions.push(strengthen(program, "torso_uprightness", None));
            }
            if score < th.distance {
                issues.push(format!("covered only {score:.2} m"));
                suggestions.push(strengthen(program, "forward", None));
            }
            if r.mean_effort > th.effort {
                issues.push(format!("mean squared command {:.2} per actuator", r.mean_effort));
                suggestions.push(strengthen(program, "effort", Some(0.2)));
            }
        } else {
            let (p, o) = manipulation_errors(best, ctx);
            if score < th.pose_score {
                if p >= ORIENTATION_WEIGHT * o {
                    issues.push(format!("object is {p:.3} m from the target"));
                    suggestions.push(strengthen(program, "target_position", None));
                } else {
                    issues.push(format!("object is {o:.3} rad off the target orientation"));
                    suggestions.push(strengthen(program, "target_orientation", None));
                }
            }
        }
        let issues = if issues.is_empty() { "none".to_string() } else { issues.join("; ") };
        Ok(Feedback { task_success: score >= self.success_threshold(task), issues, suggestions })
    }
}

impl OracleJudge {
    pub fn success_threshold(&self, task: TaskId) -> f64 {
        if task.is_locomotion() {
            self.thresholds.distance
        } else {
            self.thresholds.pose_score
        }
    }
}
