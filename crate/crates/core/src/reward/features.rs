use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Kinematics, Morphology, SystemState};
use crate::environments::Terrain;
use crate::scalar::Real;

/// Scalar quantities a reward term can reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Height,
    ForwardVelocity,
    ForwardDistance,
    Balance,
    TorsoUprightness,
    Effort,
    ControlSmoothness,
    FootClearance,
    StepSymmetry,
    JointAngle(usize),
    JointVelocity(usize),
    TargetPositionError,
    TargetOrientationError,
    ContactFlag(usize),
}

/// Catalog entry: name, whether it takes an index argument, and what it measures.
pub struct FeatureInfo {
    pub name: &'static str,
    pub indexed: bool,
    pub description: &'static str,
}

pub const FEATURE_CATALOG: &[FeatureInfo] = &[
    FeatureInfo { name: "height", indexed: false, description: "height of the root body's center of mass above the ground (m)" },
    FeatureInfo { name: "forward_velocity", indexed: false, description: "horizontal velocity of the root body's center of mass (m/s)" },
    FeatureInfo { name: "forward_distance", indexed: false, description: "horizontal displacement of the root body's center of mass since the start (m)" },
    FeatureInfo { name: "balance", indexed: false, description: "horizontal distance between the whole-body center of mass and the support midpoint (m)" },
    FeatureInfo { name: "torso_uprightness", indexed: false, description: "1 - 2·|tilt|/π for the root body; 1 upright, 0 horizontal" },
    FeatureInfo { name: "effort", indexed: false, description: "sum of squared actuator commands" },
    FeatureInfo { name: "control_smoothness", indexed: false, description: "sum of absolute command changes since the previous control step" },
    FeatureInfo { name: "foot_clearance", indexed: false, description: "largest height of any foot above the ground (m)" },
    FeatureInfo { name: "step_symmetry", indexed: false, description: "distance between the feet's mean x and the center of mass x (m); 0 when symmetric" },
    FeatureInfo { name: "joint_angle", indexed: true, description: "generalized coordinate j (rad, or m for base translations)" },
    FeatureInfo { name: "joint_velocity", indexed: true, description: "rate of generalized coordinate j" },
    FeatureInfo { name: "target_position_error", indexed: false, description: "distance from the held object to its target position (m)" },
    FeatureInfo { name: "target_orientation_error", indexed: false, description: "absolute wrapped angle between the held object and its target orientation (rad)" },
    FeatureInfo { name: "contact_flag", indexed: true, description: "1 if contact point k touches the ground, else 0" },
];

impl Feature {
    pub fn name(&self) -> &'static str {
        match self {
            Feature::Height => "height",
            Feature::ForwardVelocity => "forward_velocity",
            Feature::ForwardDistance => "forward_distance",
            Feature::Balance => "balance",
            Feature::TorsoUprightness => "torso_uprightness",
            Feature::Effort => "effort",
            Feature::ControlSmoothness => "control_smoothness",
            Feature::FootClearance => "foot_clearance",
            Feature::StepSymmetry => "step_symmetry",
            Feature::JointAngle(_) => "joint_angle",
            Feature::JointVelocity(_) => "joint_velocity",
            Feature::TargetPositionError => "target_position_error",
            Feature::TargetOrientationError => "target_orientation_error",
            Feature::ContactFlag(_) => "contact_flag",
        }
    }

    pub fn is_indexed_name(name: &str) -> Option<bool> {
        FEATURE_CATALOG.iter().find(|f| f.name == name).map(|f| f.indexed)
    }

    pub fn from_name(name: &str, index: Option<usize>) -> Option<Feature> {
        Some(match (name, index) {
            ("height", None) => Feature::Height,
            ("forward_velocity", None) => Feature::ForwardVelocity,
            ("forward_distance", None) => Feature::ForwardDistance,
            ("balance", None) => Feature::Balance,
            ("torso_uprightness", None) => Feature::TorsoUprightness,
            ("effort", None) => Feature::Effort,
            ("control_smoothness", None) => Feature::ControlSmoothness,
            ("foot_clearance", None) => Feature::FootClearance,
            ("step_symmetry", None) => Feature::StepSymmetry,
            ("joint_angle", Some(j)) => Feature::JointAngle(j),
            ("joint_velocity", Some(j)) => Feature::JointVelocity(j),
            ("target_position_error", None) => Feature::TargetPositionError,
            ("target_orientation_error", None) => Feature::TargetOrientationError,
            ("contact_flag", Some(k)) => Feature::ContactFlag(k),
            _ => return None,
        })
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::JointAngle(j) | Feature::JointVelocity(j) | Feature::ContactFlag(j) => {
                write!(f, "{}({j})", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

/// Target pose for manipulation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target<T> {
    pub position: [T; 2],
    pub orientation: T,
}

/// Task-level context needed by features but not contained in the state.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskContext<T> {
    pub morphology: Morphology<T>,
    pub terrain: Terrain<T>,
    pub target: Option<Target<T>>,
    /// Root center-of-mass x at the start of the episode.
    pub origin_x: T,
}

/// Everything a reward evaluation may look at for one step.
pub struct FeatureFrame<'a, T> {
    pub ctx: &'a TaskContext<T>,
    pub state: &'a SystemState<T>,
    pub controls: &'a [T],
    pub prev_controls: Option<&'a [T]>,
    kin: Kinematics<T>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("{feature} index {index} out of range (limit {limit})")]
    IndexOutOfRange { feature: &'static str, index: usize, limit: usize },
}

pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::TAU();
    let mut x = a % two_pi;
    if x > T::PI() {
        x = x - two_pi;
    } else if x < -T::PI() {
        x = x + two_pi;
    }
    x
}

impl<'a, T: Real> FeatureFrame<'a, T> {
    pub fn new(
        ctx: &'a TaskContext<T>,
        state: &'a SystemState<T>,
        controls: &'a [T],
        prev_controls: Option<&'a [T]>,
    ) -> Self {
        let kin = ctx.morphology.kinematics(state.q(), state.qdot());
        Self { ctx, state, controls, prev_controls, kin }
    }

    pub fn kinematics(&self) -> &Kinematics<T> {
        &self.kin
    }

    fn morph(&self) -> &Morphology<T> {
        &self.ctx.morphology
    }

    fn root_com(&self) -> [T; 2] {
        self.morph().com_position(&self.kin, 0)
    }

    /// Contact point positions grouped by the link that carries them.
    fn feet(&self) -> Vec<Vec<[T; 2]>> {
        let m = self.morph();
        let mut links: Vec<usize> = m.contact_points.iter().filter(|c| c.support).map(|c| c.link).collect();
        links.dedup();
        links
            .iter()
            .map(|&l| {
                m.contact_points
                    .iter()
                    .filter(|c| c.support && c.link == l)
                    .map(|c| m.point_position(&self.kin, c.link, c.at))
                    .collect()
            })
            .collect()
    }

    /// Position and orientation of whatever the target refers to: the held
    /// object if present, else the end effector.
    fn effector_pose(&self) -> Option<([T; 2], T)> {
        if let Some(o) = &self.state.object {
            return Some(([o.x, o.y], o.angle));
        }
        self.morph().end_effector(&self.kin)
    }

    pub fn value(&self, feature: Feature) -> Result<T, FeatureError> {
        let zero = T::zero();
        let m = self.morph();
        Ok(match feature {
            Feature::Height => {
                let c = self.root_com();
                c[1] - self.ctx.terrain.height(c[0])
            }
            Feature::ForwardVelocity => m.point_velocity(&self.kin, 0, m.links[0].com)[0],
            Feature::ForwardDistance => self.root_com()[0] - self.ctx.origin_x,
            Feature::Balance => {
                let support: Vec<T> = self.feet().into_iter().flatten().map(|p| p[0]).collect();
                if support.is_empty() {
                    zero
                } else {
                    let mid = support.iter().copied().sum::<T>() / T::from_usize(support.len()).unwrap();
                    (m.center_of_mass(&self.kin)[0] - mid).abs()
                }
            }
            Feature::TorsoUprightness => T::one() - T::lit(2.0) * wrap_angle(self.kin.angle[0]).abs() / T::PI(),
            Feature::Effort => self.controls.iter().map(|u| *u * *u).sum(),
            Feature::ControlSmoothness => match self.prev_controls {
                Some(prev) => self.controls.iter().zip(prev).map(|(a, b)| (*a - *b).abs()).sum(),
                None => zero,
            },
            Feature::FootClearance => self
                .feet()
                .iter()
                .map(|pts| {
                    pts.iter()
                        .map(|p| p[1] - self.ctx.terrain.height(p[0]))
                        .fold(T::infinity(), T::min)
                        .max(zero)
                })
                .fold(zero, T::max),
            Feature::StepSymmetry => {
                let feet = self.feet();
                if feet.is_empty() {
                    zero
                } else {
                    let n = T::from_usize(feet.len()).unwrap();
                    let mean = feet
                        .iter()
                        .map(|pts| pts.iter().map(|p| p[0]).sum::<T>() / T::from_usize(pts.len()).unwrap())
                        .sum::<T>()
                        / n;
                    (mean - m.center_of_mass(&self.kin)[0]).abs()
                }
            }
            Feature::JointAngle(j) => *self.state.q().get(j).ok_or(FeatureError::IndexOutOfRange {
                feature: "joint_angle",
                index: j,
                limit: m.dof(),
            })?,
            Feature::JointVelocity(j) => *self.state.qdot().get(j).ok_or(FeatureError::IndexOutOfRange {
                feature: "joint_velocity",
                index: j,
                limit: m.dof(),
            })?,
            Feature::TargetPositionError => match (self.ctx.target, self.effector_pose()) {
                (Some(t), Some((p, _))) => {
                    let d = [p[0] - t.position[0], p[1] - t.position[1]];
                    (d[0] * d[0] + d[1] * d[1]).sqrt()
                }
                _ => zero,
            },
            Feature::TargetOrientationError => match (self.ctx.target, self.effector_pose()) {
                (Some(t), Some((_, a))) => wrap_angle(a - t.orientation).abs(),
                _ => zero,
            },
            Feature::ContactFlag(k) => {
                let c = m.contact_points.get(k).ok_or(FeatureError::IndexOutOfRange {
                    feature: "contact_flag",
                    index: k,
                    limit: m.contact_points.len(),
                })?;
                let p = m.point_position(&self.kin, c.link, c.at);
                if p[1] < self.ctx.terrain.height(p[0]) {
                    T::one()
                } else {
                    zero
                }
            }
        })
    }
}
