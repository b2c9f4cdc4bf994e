use std::io::{Read, Write};

use super::{dynamics_step, muscle_geometry, DynamicsError, JointState, MuscleState, SimConfig, StepFlags, SystemState};
use crate::reward::{eval_step_reward, FeatureFrame, RewardProgram, TaskContext};
use crate::scalar::Real;

/// State-feedback controller.
pub trait Policy<T> {
    fn controls(&mut self, state: &SystemState<T>) -> Result<Vec<T>, PolicyError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy returned {got} controls, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("policy returned a non-finite control")]
    NonFinite,
    #[error("planner failed: {0}")]
    Planner(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RolloutError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("rollout needs at least one step")]
    Empty,
}

/// Always commands zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy(pub usize);

impl<T: Real> Policy<T> for ZeroPolicy {
    fn controls(&mut self, _state: &SystemState<T>) -> Result<Vec<T>, PolicyError> {
        Ok(vec![T::zero(); self.0])
    }
}

/// Replays a fixed command vector.
#[derive(Debug, Clone)]
pub struct ConstantPolicy<T>(pub Vec<T>);

impl<T: Real> Policy<T> for ConstantPolicy<T> {
    fn controls(&mut self, _state: &SystemState<T>) -> Result<Vec<T>, PolicyError> {
        Ok(self.0.clone())
    }
}

impl<T, F> Policy<T> for F
where
    F: FnMut(&SystemState<T>) -> Result<Vec<T>, PolicyError>,
{
    fn controls(&mut self, state: &SystemState<T>) -> Result<Vec<T>, PolicyError> {
        self(state)
    }
}

/// One control step: the state reached after holding `controls`, and the
/// reward terms evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep<T> {
    pub state: SystemState<T>,
    pub controls: Vec<T>,
    pub terms: Vec<T>,
    pub reward: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub initial: SystemState<T>,
    pub steps: Vec<TrajectoryStep<T>>,
    pub term_names: Vec<String>,
    /// Spacing between steps (s).
    pub control_dt: T,
    /// The rollout stopped early because the state became non-finite.
    pub truncated: bool,
    pub flags: StepFlags,
    /// Steps whose reward could not be evaluated; their terms are NaN.
    pub invalid_reward_steps: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn duration(&self) -> T {
        self.control_dt * T::from_usize(self.steps.len()).unwrap()
    }

    pub fn last_state(&self) -> &SystemState<T> {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial)
    }

    pub fn total_reward(&self) -> T {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Runs `policy` for `steps` control steps, each holding its command for
/// `config.control_substeps` integration steps, and records reward terms.
pub fn rollout<T: Real, P: Policy<T> + ?Sized>(
    policy: &mut P,
    ctx: &TaskContext<T>,
    s0: &SystemState<T>,
    steps: usize,
    config: &SimConfig<T>,
    program: &RewardProgram,
) -> Result<Trajectory<T>, RolloutError> {
    if steps == 0 {
        return Err(RolloutError::Empty);
    }
    config.validate()?;
    let morphology = &ctx.morphology;
    let du = morphology.n_muscles();
    let mut traj = Trajectory {
        initial: s0.clone(),
        steps: Vec::with_capacity(steps),
        term_names: program.term_names(),
        control_dt: config.control_dt(),
        truncated: false,
        flags: StepFlags::default(),
        invalid_reward_steps: 0,
    };
    let mut state = s0.clone();
    let mut prev: Option<Vec<T>> = None;
    'outer: for _ in 0..steps {
        let raw = policy.controls(&state)?;
        if raw.len() != du {
            return Err(PolicyError::Dimension { expected: du, got: raw.len() }.into());
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(PolicyError::NonFinite.into());
        }
        let u: Vec<T> = raw
            .iter()
            .map(|x| {
                if *x < T::zero() || *x > T::one() {
                    traj.flags.control_clamped = true;
                }
                x.clamp_to(T::zero(), T::one())
            })
            .collect();
        for _ in 0..config.control_substeps {
            match dynamics_step(&state, &u, morphology, config, &ctx.terrain) {
                Ok(out) if out.state.is_finite() => {
                    traj.flags.merge(out.flags);
                    state = out.state;
                }
                Ok(_) | Err(DynamicsError::NonFinite(_)) | Err(DynamicsError::SingularMassMatrix { .. }) => {
                    traj.truncated = true;
                    break 'outer;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let frame = FeatureFrame::new(ctx, &state, &u, prev.as_deref());
        let (terms, reward) = match eval_step_reward(program, &frame) {
            Ok(r) => (r.per_term, r.total),
            Err(_) => {
                traj.invalid_reward_steps += 1;
                (vec![T::nan(); program.len()], T::nan())
            }
        };
        traj.steps.push(TrajectoryStep { state: state.clone(), controls: u.clone(), terms, reward });
        prev = Some(u);
    }
    Ok(traj)
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryIoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: bad value `{value}`")]
    Value { row: usize, value: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Width { row: usize, expected: usize, found: usize },
}

fn header<T: Real>(ctx: &TaskContext<T>, term_names: &[String], with_object: bool) -> Vec<String> {
    let m = &ctx.morphology;
    let mut h = vec!["t".to_string()];
    h.extend((0..m.dof()).map(|j| format!("q{j}")));
    h.extend((0..m.dof()).map(|j| format!("qdot{j}")));
    h.extend(m.muscle_names.iter().map(|n| format!("a_{n}")));
    h.extend(m.muscle_names.iter().map(|n| format!("u_{n}")));
    if with_object {
        h.extend(["obj_x", "obj_y", "obj_angle", "obj_grasped"].map(String::from));
    }
    h.extend(term_names.iter().map(|n| format!("r_{n}")));
    h.push("reward".into());
    h
}

fn fmt_num<T: Real>(x: T) -> String {
    // Shortest representation that parses back to the same value.
    format!("{:?}", x.to_f64_lossy())
}

/// Writes one row per control step. Values are printed so they parse back exactly.
pub fn write_trajectory_csv<T: Real, W: Write>(
    traj: &Trajectory<T>,
    ctx: &TaskContext<T>,
    out: W,
) -> Result<(), TrajectoryIoError> {
    let with_object = traj.initial.object.is_some();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(ctx, &traj.term_names, with_object))?;
    for step in &traj.steps {
        let s = &step.state;
        let mut row = vec![fmt_num(s.t)];
        row.extend(s.joints.q.iter().map(|x| fmt_num(*x)));
        row.extend(s.joints.qdot.iter().map(|x| fmt_num(*x)));
        row.extend(s.muscles.a.iter().map(|x| fmt_num(*x)));
        row.extend(step.controls.iter().map(|x| fmt_num(*x)));
        if let Some(o) = &s.object {
            row.extend([fmt_num(o.x), fmt_num(o.y), fmt_num(o.angle), (o.grasped as u8).to_string()]);
        }
        row.extend(step.terms.iter().map(|x| fmt_num(*x)));
        row.push(fmt_num(step.reward));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory_csv`]. The initial state
/// is not stored in the file and is taken from `initial`.
pub fn read_trajectory_csv<T: Real, R: Read>(
    input: R,
    ctx: &TaskContext<T>,
    initial: &SystemState<T>,
    control_dt: T,
) -> Result<Trajectory<T>, TrajectoryIoError> {
    let m = &ctx.morphology;
    let (dq, du) = (m.dof(), m.n_muscles());
    let with_object = initial.object.is_some();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let fixed = header(ctx, &[], with_object);
    let n_fixed = fixed.len() - 1;
    let term_names: Vec<String> = found
        .get(n_fixed..found.len().saturating_sub(1))
        .unwrap_or(&[])
        .iter()
        .map(|h| h.strip_prefix("r_").unwrap_or(h).to_string())
        .collect();
    let expected = header(ctx, &term_names, with_object);
    if found != expected {
        return Err(TrajectoryIoError::Header { expected: expected.join(","), found: found.join(",") });
    }
    let mut steps = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != expected.len() {
            return Err(TrajectoryIoError::Width { row: i, expected: expected.len(), found: rec.len() });
        }
        let vals: Vec<T> = rec
            .iter()
            .map(|v| v.parse::<f64>().map(T::lit).map_err(|_| TrajectoryIoError::Value { row: i, value: v.into() }))
            .collect::<Result<_, _>>()?;
        let mut k = 0;
        let mut take = |n: usize| {
            let s = vals[k..k + n].to_vec();
            k += n;
            s
        };
        let t = take(1)[0];
        let q = take(dq);
        let qdot = take(dq);
        let a = take(du);
        let controls = take(du);
        let object = if with_object {
            let o = take(4);
            let mut pose = initial.object.expect("checked above");
            pose.x = o[0];
            pose.y = o[1];
            pose.angle = o[2];
            pose.grasped = o[3] != T::zero();
            Some(pose)
        } else {
            None
        };
        let terms = take(term_names.len());
        let reward = take(1)[0];
        let (l, v) = muscle_geometry(&q, &qdot, m).map_err(|_| TrajectoryIoError::Width { row: i, expected: dq, found: q.len() })?;
        steps.push(TrajectoryStep {
            state: SystemState { joints: JointState { q, qdot }, muscles: MuscleState { a, l, v }, t, object },
            controls,
            terms,
            reward,
        });
    }
    Ok(Trajectory {
        initial: initial.clone(),
        steps,
        term_names,
        control_dt,
        truncated: false,
        flags: StepFlags::default(),
        invalid_reward_steps: 0,
    })
}
