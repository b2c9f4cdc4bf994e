use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{low_level_control, posture_map, sample_candidates, ControllerError, PlannerConfig, PostureTarget};
use crate::dynamics::{dynamics_step, Morphology, Policy, PolicyError, SimConfig, SystemState};
use crate::reward::{eval_step_reward, FeatureFrame, RewardProgram, TaskContext};
use crate::scalar::Real;

/// MPPI weights `wⱼ ∝ exp(−(Cⱼ − C_min)/λ)`. Non-finite costs get zero
/// weight; `None` when no cost is finite.
pub fn mppi_weights<T: Real>(costs: &[T], temperature: T) -> Option<Vec<T>> {
    let c_min = costs.iter().copied().filter(|c| c.is_finite()).reduce(T::min)?;
    let raw: Vec<T> = costs
        .iter()
        .map(|c| if c.is_finite() { (-(*c - c_min) / temperature).exp() } else { T::zero() })
        .collect();
    let total: T = raw.iter().copied().sum();
    Some(raw.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome<T> {
    pub z: PostureTarget<T>,
    pub candidates: Vec<PostureTarget<T>>,
    pub costs: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> PlanOutcome<T> {
    /// Index of the cheapest finite candidate.
    pub fn best(&self) -> usize {
        (0..self.costs.len())
            .filter(|&i| self.costs[i].is_finite())
            .min_by(|&a, &b| self.costs[a].partial_cmp(&self.costs[b]).unwrap())
            .unwrap_or(0)
    }
}

fn combine<T: Real>(
    candidates: Vec<PostureTarget<T>>,
    costs: Vec<T>,
    temperature: T,
    t: T,
) -> Result<PlanOutcome<T>, ControllerError> {
    let weights = mppi_weights(&costs, temperature).ok_or_else(|| ControllerError::AllCandidatesFailed {
        n: candidates.len(),
        t: t.to_f64_lossy(),
        detail: "every simulated candidate diverged or hit a reward evaluation error".into(),
    })?;
    let d = candidates[0].dim();
    let mut z = vec![T::zero(); d];
    for (c, w) in candidates.iter().zip(&weights) {
        if *w == T::zero() {
            continue;
        }
        for (zi, ci) in z.iter_mut().zip(&c.z) {
            *zi = *zi + *w * *ci;
        }
    }
    Ok(PlanOutcome { z: PostureTarget { z }, candidates, costs, weights })
}

/// Samples candidates and combines them by MPPI weighting of `cost`.
/// Costs are evaluated in parallel; the result does not depend on scheduling.
pub fn plan_with_cost<T, R, F>(
    z_mean: &PostureTarget<T>,
    state: &SystemState<T>,
    morphology: &Morphology<T>,
    config: &PlannerConfig<T>,
    rng: &mut R,
    cost: F,
) -> Result<PlanOutcome<T>, ControllerError>
where
    T: Real,
    R: Rng + ?Sized,
    F: Fn(&PostureTarget<T>) -> T + Sync,
{
    config.validate()?;
    let d = morphology.posture_indices.len();
    if z_mean.dim() != d {
        return Err(ControllerError::Dimension { expected: d, got: z_mean.dim() });
    }
    let candidates = sample_candidates(z_mean, state, morphology, config, rng);
    let costs: Vec<T> = candidates.par_iter().map(&cost).collect();
    combine(candidates, costs, config.temperature, state.t)
}

/// Everything a candidate rollout needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct PlanProblem<'a, T> {
    pub program: &'a RewardProgram,
    pub ctx: &'a TaskContext<T>,
    pub sim: &'a SimConfig<T>,
}

impl<T: Real> PlanProblem<'_, T> {
    /// `−Σ r` over `horizon` control steps tracking `z`; NaN on divergence
    /// or evaluation error.
    pub fn rollout_cost(
        &self,
        state: &SystemState<T>,
        z: &PostureTarget<T>,
        prev_controls: Option<&[T]>,
        config: &PlannerConfig<T>,
    ) -> T {
        let m = &self.ctx.morphology;
        let mut s = state.clone();
        let mut prev = prev_controls.map(|p| p.to_vec());
        let mut total = T::zero();
        for _ in 0..config.horizon {
            let u = low_level_control(&s, z, m, config.k_bar);
            for _ in 0..self.sim.control_substeps {
                match dynamics_step(&s, &u, m, self.sim, &self.ctx.terrain) {
                    Ok(out) if out.state.is_finite() => s = out.state,
                    _ => return T::nan(),
                }
            }
            match eval_step_reward(self.program, &FeatureFrame::new(self.ctx, &s, &u, prev.as_deref())) {
                Ok(r) => total = total + r.total,
                Err(_) => return T::nan(),
            }
            prev = Some(u);
        }
        -total
    }
}

/// One planning step: sample around `z_mean`, roll each candidate out for
/// the horizon under the low-level law and return the MPPI combination.
pub fn plan<T: Real, R: Rng + ?Sized>(
    state: &SystemState<T>,
    z_mean: &PostureTarget<T>,
    prev_controls: Option<&[T]>,
    problem: &PlanProblem<'_, T>,
    config: &PlannerConfig<T>,
    rng: &mut R,
) -> Result<PlanOutcome<T>, ControllerError> {
    plan_with_cost(z_mean, state, &problem.ctx.morphology, config, rng, |z| {
        problem.rollout_cost(state, z, prev_controls, config)
    })
}

/// Receding-horizon policy: replans every `replan_interval` control steps,
/// warm-started from the previous target, and tracks the latest target with
/// the low-level law in between.
#[derive(Debug, Clone)]
pub struct MpcPolicy<T> {
    program: RewardProgram,
    ctx: TaskContext<T>,
    sim: SimConfig<T>,
    config: PlannerConfig<T>,
    rng: ChaCha8Rng,
    target: Option<PostureTarget<T>>,
    since_plan: usize,
    prev_controls: Option<Vec<T>>,
    plan_calls: usize,
}

impl<T: Real> MpcPolicy<T> {
    pub fn new(
        program: RewardProgram,
        ctx: TaskContext<T>,
        sim: SimConfig<T>,
        config: PlannerConfig<T>,
        seed: u64,
    ) -> Result<Self, ControllerError> {
        config.validate()?;
        Ok(Self {
            program,
            ctx,
            sim,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            target: None,
            since_plan: 0,
            prev_controls: None,
            plan_calls: 0,
        })
    }

    pub fn plan_calls(&self) -> usize {
        self.plan_calls
    }

    pub fn target(&self) -> Option<&PostureTarget<T>> {
        self.target.as_ref()
    }

    fn replan(&mut self, state: &SystemState<T>) -> Result<(), ControllerError> {
        let m = &self.ctx.morphology;
        let mean = self.target.clone().unwrap_or_else(|| posture_map(state, m));
        let problem = PlanProblem { program: &self.program, ctx: &self.ctx, sim: &self.sim };
        let out = plan(state, &mean, self.prev_controls.as_deref(), &problem, &self.config, &mut self.rng)?;
        self.target = Some(out.z);
        self.plan_calls += 1;
        self.since_plan = 0;
        Ok(())
    }
}

impl<T: Real> Policy<T> for MpcPolicy<T> {
    fn controls(&mut self, state: &SystemState<T>) -> Result<Vec<T>, PolicyError> {
        if self.target.is_none() || self.since_plan >= self.config.replan_interval {
            self.replan(state).map_err(|e| PolicyError::Planner(e.to_string()))?;
        }
        self.since_plan += 1;
        let z = self.target.as_ref().expect("planned above");
        let u = low_level_control(state, z, &self.ctx.morphology, self.config.k_bar);
        self.prev_controls = Some(u.clone());
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_candidate_weights() {
        let lambda = 0.7;
        let w = mppi_weights(&[0.0, lambda * 2f64.ln()], lambda).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_costs_drop_out() {
        let w = mppi_weights(&[f64::NAN, 1.0, f64::INFINITY], 1.0).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
        assert!(mppi_weights(&[f64::NAN, f64::NAN], 1.0).is_none());
    }

    #[test]
    fn all_failed_is_error() {
        let c = vec![PostureTarget::new(vec![0.1]), PostureTarget::new(vec![0.2])];
        let e = combine(c, vec![f64::NAN, f64::NAN], 1.0, 0.5).unwrap_err();
        assert!(matches!(e, ControllerError::AllCandidatesFailed { n: 2, .. }));
    }
}
