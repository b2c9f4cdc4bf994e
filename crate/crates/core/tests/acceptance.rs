//! Acceptance criteria, one line per criterion. Run with
//! `cargo test -p musclelab --test acceptance`.

mod common;

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use musclelab::controller::*;
use musclelab::dynamics::*;
use musclelab::environments::{build_task, default_program_text, presets, TaskId};
use musclelab::judge::{parse_selection, Choice, EndpointJudge, MotionDescription};
use musclelab::learn::{self, read_heatmap_csv, Agents, JudgeMode, RunConfig, Seeds, SynthMode};
use musclelab::reward::*;
use musclelab::synthesis::{EndpointSynthesizer, SynthesisContext, Synthesizer};
use musclelab::transport::{ChatRequest, ChatTransport, ContentPart, ReplayTransport, ScriptedTransport, TransportError, REQUEST_SCHEMA};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn run(&mut self, name: &'static str, budget_s: f64, check: impl FnOnce() -> Check) {
        let t0 = Instant::now();
        let result = check();
        let secs = t0.elapsed().as_secs_f64();
        let result = result.and_then(|detail| {
            if secs <= budget_s {
                Ok(detail)
            } else {
                Err(format!("{detail}; runtime {secs:.1} s exceeds {budget_s} s"))
            }
        });
        match result {
            Ok(detail) => println!("PASS  {name:<22} {secs:>7.2} s  {detail}"),
            Err(detail) => {
                println!("FAIL  {name:<22} {secs:>7.2} s  {detail}");
                self.failed.push(name);
            }
        }
    }
}

// Classical RK4 with fine substeps; τ is fixed over the step as in the model.
fn rk4_activation(a0: f64, u: f64, p: &MuscleParams<f64>, dt: f64) -> f64 {
    let tau = if u > a0 { p.tau_act } else { p.tau_deact };
    let f = |a: f64| (u - a) / tau;
    let n = 200;
    let h = dt / n as f64;
    let mut a = a0;
    for _ in 0..n {
        let k1 = f(a);
        let k2 = f(a + 0.5 * h * k1);
        let k3 = f(a + 0.5 * h * k2);
        let k4 = f(a + h * k3);
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    a
}

fn activation_ode() -> Check {
    let p = MuscleParams::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, u, dt) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0), rng.random_range(1e-4..0.02));
        let got = activation_step(a, u, &p, dt).map_err(|e| e.to_string())?.activation;
        worst = worst.max((got - rk4_activation(a, u, &p, dt)).abs());
    }
    ensure(worst <= 1e-6, || format!("max deviation from RK4 {worst:e}"))?;
    for _ in 0..1000 {
        let mut a: f64 = rng.random_range(0.0..=1.0);
        for _ in 0..100 {
            let u = rng.random_range(-0.5..1.5);
            a = activation_step(a, u, &p, rng.random_range(1e-4..0.05)).map_err(|e| e.to_string())?.activation;
            ensure((0.0..=1.0).contains(&a), || format!("activation left [0, 1]: {a}"))?;
        }
    }
    Ok(format!("max |exact − RK4| = {worst:.1e}; 1000 sequences stay in [0, 1]"))
}

fn state_at(m: &Morphology<f64>, q: Vec<f64>, qdot: Vec<f64>) -> SystemState<f64> {
    let (l, v) = muscle_geometry(&q, &qdot, m).unwrap();
    SystemState {
        joints: JointState { q, qdot },
        muscles: MuscleState { a: vec![0.0; m.n_muscles()], l, v },
        t: 0.0,
        object: None,
    }
}

fn dynamics_sanity() -> Check {
    let m = presets::arm::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_asym: f64 = 0.0;
    for _ in 0..100 {
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mm = m.mass_matrix(&m.kinematics(&q, &[0.0; 3]));
        worst_asym = worst_asym.max(mm.asymmetry());
        let dense = DMatrix::from_fn(3, 3, |r, c| mm.get(r, c));
        ensure(dense.cholesky().is_some(), || format!("M(q) not positive definite at {q:?}"))?;
    }
    ensure(worst_asym <= 1e-10, || format!("asymmetry {worst_asym:e}"))?;

    let mut pend = presets::pendulum::<f64>();
    pend.base_origin = [0.0, 2.0];
    let cfg = SimConfig::default();
    let energy = |s: &SystemState<f64>| {
        let kin = pend.kinematics(s.q(), s.qdot());
        pend.kinetic_energy(&kin) + pend.potential_energy(&kin, cfg.gravity)
    };
    let mut s = state_at(&pend, vec![1.0], vec![0.0]);
    // Energy above the lowest point of the link's centre of mass.
    let floor = -pend.links[0].mass * cfg.gravity * (2.0 - 0.5);
    let e0 = energy(&s) + floor;
    let mut drift: f64 = 0.0;
    for _ in 0..5000 {
        s = dynamics_step(&s, &[], &pend, &cfg, &musclelab::Terrain::flat()).map_err(|e| e.to_string())?.state;
        drift = drift.max((energy(&s) + floor - e0).abs() / e0);
    }
    ensure(drift < 0.01, || format!("energy drift {:.3}%", 100.0 * drift))?;
    Ok(format!("asymmetry ≤ {worst_asym:.1e}, 100/100 PD; pendulum drift {:.3}% over 5 s", 100.0 * drift))
}

fn gain_law() -> Check {
    let m = presets::arm::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100_000 {
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let qdot: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = state_at(&m, q, qdot);
        let z = PostureTarget::new((0..3).map(|_| rng.random_range(-1.5..1.5)).collect());
        let k_bar = rng.random_range(0.0..1e7);
        ensure(actuator_gains(&s, &z, &m, k_bar).iter().all(|k| *k >= 0.0), || "negative gain".into())?;
        ensure(desired_forces(&s, &z, &m, k_bar).iter().all(|f| *f <= 0.0), || "pushing force".into())?;
        let here = posture_map(&s, &m);
        ensure(actuator_gains(&s, &here, &m, k_bar).iter().all(|k| *k == 0.0), || "gain at zero error".into())?;
        ensure(low_level_control(&s, &here, &m, k_bar).iter().all(|u| *u == 0.0), || "command at zero error".into())?;
    }
    let one = presets::single_muscle_joint::<f64>();
    let s = state_at(&one, vec![0.0], vec![0.0]);
    let k = actuator_gains(&s, &PostureTarget::new(vec![0.5]), &one, 100.0);
    ensure(k == vec![2.5], || format!("example gain {k:?}"))?;
    Ok("1e5 random cases: K ≥ 0, f* ≤ 0, zero at the current posture; example K = 2.5".into())
}

fn planner() -> Check {
    let costs = [3.0, -1.5, 0.25, 7.0, 0.0];
    let base = mppi_weights(&costs, 0.5).ok_or("weights")?;
    let shifted: Vec<f64> = costs.iter().map(|c| c + 123.0).collect();
    let moved = mppi_weights(&shifted, 0.5).ok_or("weights")?;
    let shift_err = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(shift_err <= 1e-12, || format!("shift changed weights by {shift_err:e}"))?;

    let lambda = 0.01;
    let w = mppi_weights(&[0.0, lambda * 2f64.ln()], lambda).ok_or("weights")?;
    let pair_err = (w[0] - 2.0 / 3.0).abs().max((w[1] - 1.0 / 3.0).abs());
    ensure(pair_err <= 1e-12, || format!("two-candidate weights {w:?}"))?;

    let m = presets::single_muscle_joint::<f64>();
    let s = state_at(&m, vec![0.0], vec![0.0]);
    let cost = |z: f64| (z - 0.3) * (z - 0.3);
    let grid_best = (0..=20_000)
        .map(|i| -1.0 + 2.0 * i as f64 / 20_000.0)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .expect("grid");
    let config = PlannerConfig { temperature: 1e-4, n_samples: 64, ..PlannerConfig::default() };
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mean = posture_map(&s, &m);
        for _ in 0..10 {
            mean = plan_with_cost(&mean, &s, &m, &config, &mut rng, |z| cost(z.z[0])).map_err(|e| e.to_string())?.z;
        }
        worst = worst.max((mean.z[0] - grid_best).abs());
    }
    ensure(worst < config.noise_sigma, || format!("worst distance to grid optimum {worst}"))?;
    Ok(format!("shift {shift_err:.0e}, pair {pair_err:.0e}, 1-D worst |z − z_grid| = {worst:.4} < σ = {}", config.noise_sigma))
}

fn controller_regression() -> Check {
    let task: musclelab::Task = build_task(TaskId::ArmReach, 0);
    let target = [0.6, 1.0, 0.0];
    let program = parse_program(
        "term posture { -(abs(joint_angle(0) - 0.6) + abs(joint_angle(1) - 1.0) + abs(joint_angle(2))) / 3 } @ 1",
    )
    .map_err(|e| e.to_string())?;
    let mut ctx = task.context.clone();
    ctx.target = None;
    let s0 = state_at(task.morphology(), vec![0.1, 0.5, -0.5], vec![0.0; 3]);
    let mut policy = MpcPolicy::new(program.clone(), ctx.clone(), task.sim.clone(), task.planner.clone(), 7)
        .map_err(|e| e.to_string())?;
    let traj = rollout(&mut policy, &ctx, &s0, 200, &task.sim, &program).map_err(|e| e.to_string())?;
    let q = traj.last_state().q();
    let err = q.iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>() / 3.0;
    ensure(err < 0.1, || format!("mean joint error {err:.4} rad after 2 s"))?;
    Ok(format!("mean joint error {err:.4} rad after 2 s (start 0.5 rad)"))
}

fn reward_dsl() -> Check {
    let task: musclelab::Task = build_task(TaskId::WalkerFlat, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..500 {
        let p = common::random_program(&mut rng);
        let text = p.to_text();
        let back = parse_program(&text).map_err(|e| format!("program {i}: {e}\n{text}"))?;
        ensure(back == p && back.to_text() == text, || format!("program {i} did not round-trip:\n{text}"))?;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let mut p = RewardProgram::default();
        for k in 0..rng.random_range(1..5) {
            p.push(format!("t{k}"), common::random_tame_expr(&mut rng, 3), rng.random_range(0.0..5.0));
        }
        let mut s = task.initial_state.clone();
        s.joints.q.iter_mut().for_each(|q| *q += rng.random_range(-0.3..0.3));
        let u = vec![0.3; 16];
        let frame = FeatureFrame::new(&task.context, &s, &u, None);
        let alpha = rng.random_range(0.0..20.0);
        let a = eval_step_reward(&p, &frame).map_err(|e| e.to_string())?;
        let b = eval_step_reward(&p.scaled(alpha), &frame).map_err(|e| e.to_string())?;
        worst = worst.max((b.total - alpha * a.total).abs() / (1.0 + (alpha * a.total).abs()));
    }
    ensure(worst <= 1e-12, || format!("linearity error {worst:e}"))?;

    let p = parse_program(default_program_text(TaskId::WalkerFlat)).map_err(|e| e.to_string())?;
    let u = vec![0.0; 16];
    let frame = FeatureFrame::new(&task.context, &task.initial_state, &u, None);
    let got = eval_step_reward(&p, &frame).map_err(|e| e.to_string())?.total;
    let f = |x| frame.value(x).expect("feature");
    let hand = 2.0 * f(Feature::Height) + 2.0 * f(Feature::TorsoUprightness) + 1.0 * -f(Feature::Balance)
        + 0.5 * f(Feature::ForwardVelocity);
    ensure(got == hand, || format!("walking program {got} vs dot product {hand}"))?;
    Ok(format!("500 round-trips; linearity {worst:.0e}; walking program = Σ wₖ rₖ = {got:.6} exactly"))
}

struct LoopOutcome {
    ratio: f64,
    scores: Vec<f64>,
    secs: f64,
}

fn walker_config() -> RunConfig {
    let mut c = RunConfig::new(TaskId::WalkerFlat);
    c.iterations = 8;
    c.samples_per_iter = 4;
    c.seeds = Seeds::all(1);
    c
}

fn learning_loop(dirs: &[&Path; 2], outcome: &mut Option<LoopOutcome>) -> Check {
    let c = walker_config();
    let t0 = Instant::now();
    let h = learn::run(&c, dirs[0], &Agents::for_config(&c, dirs[0], None).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let scores = h.incumbent_scores();
    for (i, w) in scores.windows(2).enumerate() {
        ensure(w[1] >= w[0], || format!("score dropped at iteration {}: {scores:?}", i + 1))?;
    }
    let ratio = scores[scores.len() - 1] / scores[0];
    learn::run(&c, dirs[1], &Agents::for_config(&c, dirs[1], None).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let a = fs::read(dirs[0].join("history.json")).map_err(|e| e.to_string())?;
    let b = fs::read(dirs[1].join("history.json")).map_err(|e| e.to_string())?;
    *outcome = Some(LoopOutcome { ratio, scores: scores.clone(), secs });
    ensure(a == b, || "history.json differs between identical runs".into())?;
    ensure(ratio >= 1.5, || format!("final/initial distance {ratio:.2} < 1.5 ({scores:?})"))?;
    ensure(secs < 15.0 * 60.0, || format!("one run took {secs:.0} s"))?;
    Ok(format!(
        "distance {:.2} m → {:.2} m ({ratio:.2}×), monotone, identical history; one run {secs:.0} s",
        scores[0],
        scores[scores.len() - 1]
    ))
}

fn heatmap(dir: &Path) -> Check {
    let h = learn::load_history(dir).map_err(|e| e.to_string())?;
    let programs = h.incumbent_programs().map_err(|e| e.to_string())?;
    let m = weight_matrix(&programs);
    let text = fs::read_to_string(dir.join("heatmap.csv")).map_err(|e| e.to_string())?;
    let (terms, rows) = read_heatmap_csv(&text)?;
    ensure(terms == m.terms && rows == m.normalized, || "CSV does not read back to the matrix".into())?;
    let mut union: Vec<String> = Vec::new();
    for p in &programs {
        for n in p.term_names() {
            if !union.contains(&n) {
                union.push(n);
            }
        }
    }
    ensure(terms == union, || format!("rows {terms:?} vs union {union:?}"))?;
    ensure(rows.iter().all(|r| r.len() == h.config.iterations), || "column count".into())?;
    let mut worst: f64 = 0.0;
    for s in 0..h.config.iterations {
        if !m.degenerate[s] {
            worst = worst.max((rows.iter().map(|r| r[s].abs()).sum::<f64>() - 1.0).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("column sum error {worst:e}"))?;
    Ok(format!("{}×{} matrix, column sums within {worst:.0e}, exact CSV round-trip", terms.len(), h.config.iterations))
}

/// Deterministic stand-in endpoint used to produce transcripts.
struct FakeEndpoint;

impl ChatTransport for FakeEndpoint {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        let text = match &req.messages[0].content[0] {
            ContentPart::Text { text } => text.clone(),
            _ => String::new(),
        };
        if text.starts_with("You are judging") {
            let frames = req.messages[0].content.len();
            return Ok(if frames % 2 == 0 { "Second." } else { "First." }.into());
        }
        if text.starts_with("You are reviewing") {
            return Ok("SUCCESS: NO\nISSUES: misses the target\nSUGGESTIONS:\n- increase target_position\n".into());
        }
        let variant = text
            .split("variant ")
            .nth(1)
            .and_then(|s| s.split_whitespace().next())
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(1);
        Ok(format!(
            "```reward\nterm target_position {{ -target_position_error }} @ {}\nterm target_orientation {{ -target_orientation_error }} @ 0.2\n```",
            0.5 + variant as f64 * 0.5
        ))
    }
}

fn endpoint_clients(dir: &Path) -> Check {
    let schema = jsonschema::validator_for(&serde_json::from_str(REQUEST_SCHEMA).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let task: musclelab::Task = build_task(TaskId::WalkerFlat, 0);
    let program = parse_program(default_program_text(TaskId::WalkerFlat)).map_err(|e| e.to_string())?;
    let traj = rollout(&mut ZeroPolicy(16), &task.context, &task.initial_state, 50, &task.sim, &program)
        .map_err(|e| e.to_string())?;
    let desc = MotionDescription::for_task(&task);
    let judge = EndpointJudge::new(Arc::new(ScriptedTransport::new(Vec::<String>::new())), "m");
    let mut bodies = vec![
        judge.selection_request(&desc, &task.context, &traj, &traj).map_err(|e| e.to_string())?,
        judge.feedback_request(&desc, &task.context, &traj, &program).map_err(|e| e.to_string())?,
    ];
    let scripted = Arc::new(ScriptedTransport::new(["term bad { nope } @ 1", "term ok { height } @ 1"]));
    let ctx = SynthesisContext {
        description: desc,
        task: &task,
        feedback: musclelab::judge::Feedback { task_success: false, issues: "falls".into(), suggestions: Vec::new() },
        incumbent: program.clone(),
        history: vec![program],
        max_weight: 10.0,
    };
    EndpointSynthesizer::new(scripted.clone(), "m").propose(&ctx, 1, 0).map_err(|e| e.to_string())?;
    bodies.extend(scripted.requests.lock().unwrap().iter().cloned());
    for (i, b) in bodies.iter().enumerate() {
        let v = serde_json::to_value(b).map_err(|e| e.to_string())?;
        ensure(schema.is_valid(&v), || format!("request {i} violates the schema"))?;
    }

    let mut c = RunConfig::new(TaskId::ArmReach);
    c.iterations = 3;
    c.samples_per_iter = 2;
    c.horizon_s = Some(0.2);
    c.judge = JudgeMode::Endpoint;
    c.synthesis = SynthMode::Endpoint;
    c.model = Some("fake-model".into());
    let (live, replayed) = (dir.join("live"), dir.join("replayed"));
    let agents = Agents::for_config(&c, &live, Some(Arc::new(FakeEndpoint))).map_err(|e| e.to_string())?;
    learn::run(&c, &live, &agents).map_err(|e| e.to_string())?;
    let replay = Arc::new(ReplayTransport::from_dir(&live.join("transcripts")).map_err(|e| e.to_string())?);
    let agents = Agents::for_config(&c, &replayed, Some(replay.clone())).map_err(|e| e.to_string())?;
    learn::run(&c, &replayed, &agents).map_err(|e| e.to_string())?;
    let same = fs::read(live.join("history.json")).ok() == fs::read(replayed.join("history.json")).ok();
    ensure(same, || "replayed history.json differs".into())?;
    ensure(replay.remaining() == 0, || format!("{} recorded answers unused", replay.remaining()))?;

    let accepted = [("first", Some(Choice::First)), ("Second.", Some(Choice::Second)), ("FIRST, clearly", Some(Choice::First))];
    let rejected = ["firstly", "the first", "1", "", "second-best", "both"];
    for (t, want) in accepted {
        ensure(parse_selection(t) == want, || format!("`{t}` parsed as {:?}", parse_selection(t)))?;
    }
    for t in rejected {
        ensure(parse_selection(t).is_none(), || format!("`{t}` was accepted"))?;
    }
    Ok(format!("{} request bodies valid; replayed run identical; selection parser strict", bodies.len()))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let (a, b) = (scratch.path().join("walker_a"), scratch.path().join("walker_b"));
    let mut report = Report { failed: Vec::new() };
    println!("acceptance criteria");
    report.run("activation ODE", 5.0, activation_ode);
    report.run("dynamics sanity", 30.0, dynamics_sanity);
    report.run("gain law", 5.0, gain_law);
    report.run("planner", 60.0, planner);
    report.run("controller regression", 60.0, controller_regression);
    report.run("reward DSL", 60.0, reward_dsl);
    let mut outcome = None;
    report.run("learning loop", 2.0 * 15.0 * 60.0, || learning_loop(&[&a, &b], &mut outcome));
    if let Some(o) = &outcome {
        let shown: Vec<String> = o.scores.iter().map(|s| format!("{s:.3}")).collect();
        println!("      incumbent distances: {} (×{:.2}, {:.0} s per run)", shown.join(" "), o.ratio, o.secs);
    }
    report.run("heatmap export", 10.0, || heatmap(&a));
    report.run("endpoint clients", 120.0, || endpoint_clients(scratch.path()));
    if report.failed.is_empty() {
        println!("all 9 criteria passed");
    } else {
        println!("{} of 9 criteria failed: {}", report.failed.len(), report.failed.join(", "));
        std::process::exit(1);
    }
}
