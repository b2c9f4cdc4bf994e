//! Task catalog: morphology, terrain, initial state and scoring context.

pub mod presets;
mod terrain;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::PlannerConfig;
use crate::dynamics::{muscle_geometry, JointState, Morphology, MuscleState, ObjectPose, SimConfig, SystemState};
use crate::reward::{Target, TaskContext};
use crate::scalar::Real;
pub use terrain::{Terrain, TerrainKind, ROUGH_AMPLITUDE, ROUGH_SPACING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    WalkerFlat,
    WalkerSlope,
    WalkerRough,
    WalkerInjured,
    ArmReach,
    ArmReorient,
}

impl TaskId {
    pub const ALL: [TaskId; 6] = [
        TaskId::WalkerFlat,
        TaskId::WalkerSlope,
        TaskId::WalkerRough,
        TaskId::WalkerInjured,
        TaskId::ArmReach,
        TaskId::ArmReorient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::WalkerFlat => "walker_flat",
            TaskId::WalkerSlope => "walker_slope",
            TaskId::WalkerRough => "walker_rough",
            TaskId::WalkerInjured => "walker_injured",
            TaskId::ArmReach => "arm_reach",
            TaskId::ArmReorient => "arm_reorient",
        }
    }

    pub fn is_locomotion(self) -> bool {
        !self.is_manipulation()
    }

    pub fn is_manipulation(self) -> bool {
        matches!(self, TaskId::ArmReach | TaskId::ArmReorient)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("unknown task `{0}` (known: walker_flat, walker_slope, walker_rough, walker_injured, arm_reach, arm_reorient)")]
    UnknownTask(String),
}

impl FromStr for TaskId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| EnvError::UnknownTask(s.to_string()))
    }
}

/// Weakened actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injury {
    pub muscle: usize,
    pub muscle_name: String,
    /// Multiplier on peak force, in `[0, 1]`.
    pub strength: f64,
}

/// Serializable task description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: TaskId,
    pub morphology: String,
    /// Name used for the body in prompts.
    pub body: String,
    pub terrain: TerrainKind,
    /// Episode length (s).
    pub horizon_s: f64,
    pub motion_description: String,
    /// What the feedback should concentrate on.
    pub focus: String,
    pub target: Option<Target<f64>>,
    pub injury: Vec<Injury>,
    pub seed: u64,
}

pub const DEFAULT_HORIZON_S: f64 = 10.0;
/// Amplitude of the seeded initial joint perturbation (rad).
pub const INITIAL_JITTER: f64 = 0.01;
pub const INJURY_STRENGTH: f64 = 0.3;
pub const SLOPE_ANGLE: f64 = 0.05;

/// A fully built task: everything needed to simulate, score and render.
#[derive(Debug, Clone, PartialEq)]
pub struct Task<T> {
    pub spec: TaskSpec,
    pub context: TaskContext<T>,
    pub sim: SimConfig<T>,
    /// Planner settings that work for this body.
    pub planner: PlannerConfig<T>,
    pub initial_state: SystemState<T>,
}

impl<T: Real> Task<T> {
    pub fn morphology(&self) -> &Morphology<T> {
        &self.context.morphology
    }

    pub fn terrain(&self) -> &Terrain<T> {
        &self.context.terrain
    }

    pub fn id(&self) -> TaskId {
        self.spec.task_id
    }

    /// Number of control steps in the default horizon.
    pub fn horizon_steps(&self) -> usize {
        (self.spec.horizon_s / self.sim.control_dt().to_f64_lossy()).round() as usize
    }
}

fn description(id: TaskId) -> &'static str {
    match id {
        TaskId::WalkerFlat => "Walk forward across level ground at about 1 m/s, upright and without falling.",
        TaskId::WalkerSlope => "Walk forward up a gentle incline at about 1 m/s, upright and without falling.",
        TaskId::WalkerRough => "Walk forward over bumpy ground at about 1 m/s, upright and without falling.",
        TaskId::WalkerInjured => {
            "Walk forward across level ground despite a weakened right hamstring and calf, upright and without falling."
        }
        TaskId::ArmReach => "Carry the held object to the marked target position and orientation.",
        TaskId::ArmReorient => "Rotate the held object to the marked target orientation while keeping it near the target position.",
    }
}

fn state_from_q<T: Real>(morphology: &Morphology<T>, q: Vec<T>, object: Option<ObjectPose<T>>) -> SystemState<T> {
    let qdot = vec![T::zero(); q.len()];
    let (l, v) = muscle_geometry(&q, &qdot, morphology).expect("preset dimensions agree");
    SystemState {
        joints: JointState { q, qdot },
        muscles: MuscleState { a: vec![T::zero(); morphology.n_muscles()], l, v },
        t: T::zero(),
        object,
    }
}

/// Builds a task deterministically from its id and seed. The seed drives
/// the rough height field and a small perturbation of the initial joint angles.
pub fn build_task<T: Real>(task_id: TaskId, seed: u64) -> Task<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |x: f64| x + rng.random_range(-INITIAL_JITTER..=INITIAL_JITTER);
    let mut injury = Vec::new();
    let (mut morphology, terrain, q, target, sim) = match task_id {
        TaskId::WalkerFlat | TaskId::WalkerSlope | TaskId::WalkerRough | TaskId::WalkerInjured => {
            let mut m = presets::walker::<T>();
            let terrain = match task_id {
                TaskId::WalkerSlope => Terrain::slope(T::lit(SLOPE_ANGLE)),
                TaskId::WalkerRough => Terrain::rough(seed),
                _ => Terrain::flat(),
            };
            if task_id == TaskId::WalkerInjured {
                for name in ["hamstring_r", "gastrocnemius_r"] {
                    let i = m.muscle_names.iter().position(|n| n == name).expect("preset muscle");
                    m.muscle_params[i].f_max = m.muscle_params[i].f_max * T::lit(INJURY_STRENGTH);
                    injury.push(Injury { muscle: i, muscle_name: name.into(), strength: INJURY_STRENGTH });
                }
            }
            let mut q: Vec<T> = presets::WALKER_STANCE
                .iter()
                .enumerate()
                .map(|(j, &x)| T::lit(if j >= 3 { jitter(x) } else { x }))
                .collect();
            // Rest the lowest contact point on the ground.
            let zeros = vec![T::zero(); q.len()];
            let kin = m.kinematics(&q, &zeros);
            let gap = m
                .contact_points
                .iter()
                .map(|c| {
                    let p = m.point_position(&kin, c.link, c.at);
                    p[1] - terrain.height(p[0])
                })
                .fold(T::infinity(), T::min);
            q[1] = q[1] - gap;
            let mut sim = SimConfig::default();
            sim.gravity = T::lit(9.81);
            (m, terrain, q, None, sim)
        }
        TaskId::ArmReach | TaskId::ArmReorient => {
            let m = presets::arm::<T>();
            let q: Vec<T> = [0.3, 0.6, 0.0].iter().map(|&x| T::lit(jitter(x))).collect();
            let goal_q: [f64; 3] = if task_id == TaskId::ArmReach { [0.9, 1.3, 0.2] } else { [0.2, 1.1, -0.8] };
            let goal_q: Vec<T> = goal_q.iter().map(|&x| T::lit(x)).collect();
            let zeros = vec![T::zero(); 3];
            let (pos, angle) = m.end_effector(&m.kinematics(&goal_q, &zeros)).expect("arm has an effector");
            let target = Target { position: pos, orientation: angle };
            let mut sim = SimConfig::default();
            // Horizontal plane.
            sim.gravity = T::zero();
            (m, Terrain::flat(), q, Some(target), sim)
        }
    };
    morphology.validate().expect("preset morphology is valid");
    let object = if task_id.is_manipulation() {
        let zeros = vec![T::zero(); q.len()];
        let (tip, angle) = morphology.end_effector(&morphology.kinematics(&q, &zeros)).unwrap();
        let mut obj = ObjectPose::free(tip[0], tip[1], angle);
        crate::dynamics::step_update_object(&mut obj, tip, angle);
        Some(obj)
    } else {
        None
    };
    let initial_state = state_from_q(&morphology, q, object);
    let kin = morphology.kinematics(initial_state.q(), initial_state.qdot());
    let origin_x = morphology.com_position(&kin, 0)[0];
    let spec = TaskSpec {
        task_id,
        morphology: morphology.name.clone(),
        body: if task_id.is_locomotion() { "planar biped".into() } else { "planar arm".into() },
        terrain: terrain.kind,
        horizon_s: DEFAULT_HORIZON_S,
        motion_description: description(task_id).into(),
        focus: if task_id.is_locomotion() { "gait and balance".into() } else { "object pose accuracy".into() },
        target: target.map(|t| Target {
            position: [t.position[0].to_f64_lossy(), t.position[1].to_f64_lossy()],
            orientation: t.orientation.to_f64_lossy(),
        }),
        injury,
        seed,
    };
    morphology.name = spec.morphology.clone();
    Task {
        spec,
        context: TaskContext { morphology, terrain, target, origin_x },
        sim,
        planner: planner_preset(task_id),
        initial_state,
    }
}

/// Planner settings tuned per body.
pub fn planner_preset<T: Real>(task_id: TaskId) -> PlannerConfig<T> {
    let base = PlannerConfig { horizon: 30, n_samples: 32, ..PlannerConfig::default() };
    if task_id.is_locomotion() {
        PlannerConfig { k_bar: T::lit(1.0e7), replan_interval: 10, ..base }
    } else {
        PlannerConfig { k_bar: T::lit(1.0e5), temperature: T::lit(0.01), ..base }
    }
}

/// Parses the id and builds the task.
pub fn build_task_named<T: Real>(task_id: &str, seed: u64) -> Result<Task<T>, EnvError> {
    Ok(build_task(task_id.parse()?, seed))
}

/// Starting reward program for each task family.
pub fn default_program_text(task_id: TaskId) -> &'static str {
    if task_id.is_locomotion() {
        include_str!("../../programs/walker_initial.reward")
    } else {
        include_str!("../../programs/arm_initial.reward")
    }
}
