use std::sync::Arc;

use musclelab::dynamics::{Trajectory, TrajectoryStep};
use musclelab::environments::{build_task, TaskId};
use musclelab::judge::*;
use musclelab::render::{render_frames, RenderConfig};
use musclelab::reward::{parse_program, RewardProgram};
use musclelab::transport::{ScriptedTransport, REQUEST_SCHEMA};
use musclelab::{SystemState, Task};
use proptest::prelude::*;

fn task(id: TaskId) -> Task {
    build_task(id, 0)
}

/// A trajectory whose rows come from `state_at(k)` for k = 0..n.
fn crafted(task: &Task, n: usize, state_at: impl Fn(usize, &SystemState) -> SystemState) -> Trajectory<f64> {
    let du = task.morphology().n_muscles();
    Trajectory {
        initial: task.initial_state.clone(),
        steps: (0..n)
            .map(|k| TrajectoryStep {
                state: state_at(k, &task.initial_state),
                controls: vec![0.0; du],
                terms: Vec::new(),
                reward: 0.0,
            })
            .collect(),
        term_names: Vec::new(),
        control_dt: task.sim.control_dt(),
        truncated: false,
        flags: Default::default(),
        invalid_reward_steps: 0,
    }
}

/// Walker slid forward rigidly by `x(k)` metres and lowered by `drop(k)`.
fn walker_path(task: &Task, n: usize, x: impl Fn(usize) -> f64, drop: impl Fn(usize) -> f64) -> Trajectory<f64> {
    crafted(task, n, |k, s0| {
        let mut s = s0.clone();
        s.joints.q[0] += x(k);
        s.joints.q[1] -= drop(k);
        s
    })
}

fn desc(task: &Task) -> MotionDescription {
    MotionDescription::for_task(task)
}

#[test]
fn steady_walk_scores_its_displacement() {
    let t = task(TaskId::WalkerFlat);
    let traj = walker_path(&t, 1000, |k| 2.4 * (k + 1) as f64 / 1000.0, |_| 0.0);
    let s = oracle_score(&desc(&t), &traj, &t.context).unwrap();
    assert!((s - 2.4).abs() < 1e-12, "{s}");
}

#[test]
fn fall_freezes_the_displacement() {
    let t = task(TaskId::WalkerFlat);
    // Fallen from t = 3 s (row 299) onwards while still sliding.
    let traj = walker_path(&t, 1000, |k| 0.8 * (k + 1) as f64 / 300.0, |k| if k >= 299 { 0.5 } else { 0.0 });
    let s = oracle_score(&desc(&t), &traj, &t.context).unwrap();
    assert!((s - 0.8).abs() < 1e-12, "{s}");
    let r = locomotion_report(&traj, &t.context);
    assert!((r.fall_time.unwrap() - 3.0).abs() < 1e-9);
}

fn arm_with_object_error(t: &Task, dpos: f64, dangle: f64) -> Trajectory<f64> {
    let target = t.context.target.unwrap();
    crafted(t, 10, |_, s0| {
        let mut s = s0.clone();
        let o = s.object.as_mut().unwrap();
        o.x = target.position[0] + dpos;
        o.y = target.position[1];
        o.angle = target.orientation + dangle;
        s
    })
}

#[test]
fn manipulation_scores() {
    let t = task(TaskId::ArmReorient);
    let exact = arm_with_object_error(&t, 0.0, 0.0);
    assert_eq!(oracle_score(&desc(&t), &exact, &t.context).unwrap(), 0.0);
    let off = arm_with_object_error(&t, 0.03, 0.2);
    let s = oracle_score(&desc(&t), &off, &t.context).unwrap();
    assert!((s + (0.03 + 0.5 * 0.2)).abs() < 1e-12, "{s}");
}

#[test]
fn bad_bindings() {
    let t = task(TaskId::WalkerFlat);
    let traj = walker_path(&t, 5, |_| 0.0, |_| 0.0);
    let mut d = desc(&t);
    d.task_id = "walker_moon".into();
    assert!(matches!(oracle_score(&d, &traj, &t.context), Err(JudgeError::UnknownTask(_))));
    let empty = walker_path(&t, 0, |_| 0.0, |_| 0.0);
    assert!(matches!(oracle_score(&desc(&t), &empty, &t.context), Err(JudgeError::EmptyTrajectory)));
}

#[test]
fn oracle_compare_rules() {
    let t = task(TaskId::WalkerFlat);
    let judge = OracleJudge::default();
    let d = desc(&t);
    let far = walker_path(&t, 100, |k| 2.0 * (k + 1) as f64 / 100.0, |_| 0.0);
    let near = walker_path(&t, 100, |k| 1.0 * (k + 1) as f64 / 100.0, |_| 0.0);
    assert_eq!(judge.compare(&d, &t.context, &far, Some(&near)).unwrap().choice, Choice::First);
    assert_eq!(judge.compare(&d, &t.context, &near, Some(&far)).unwrap().choice, Choice::Second);
    assert_eq!(judge.compare(&d, &t.context, &near, Some(&near.clone())).unwrap().choice, Choice::Second);
    assert_eq!(judge.compare(&d, &t.context, &near, None).unwrap().choice, Choice::First);
}

proptest! {
    #[test]
    fn compare_is_antisymmetric(a in -1.0f64..3.0, b in -1.0f64..3.0) {
        prop_assume!(a != b);
        let t = task(TaskId::WalkerFlat);
        let judge = OracleJudge::default();
        let d = desc(&t);
        let ta = walker_path(&t, 3, |k| a * (k + 1) as f64 / 3.0, |_| 0.0);
        let tb = walker_path(&t, 3, |k| b * (k + 1) as f64 / 3.0, |_| 0.0);
        let sa = oracle_score(&d, &ta, &t.context).unwrap();
        let sb = oracle_score(&d, &tb, &t.context).unwrap();
        prop_assume!(sa != sb);
        let ab = judge.compare(&d, &t.context, &ta, Some(&tb)).unwrap().choice;
        let ba = judge.compare(&d, &t.context, &tb, Some(&ta)).unwrap().choice;
        prop_assert_ne!(ab, ba);
    }
}

#[test]
fn falling_walker_critique() {
    let t = task(TaskId::WalkerFlat);
    let judge = OracleJudge::new(OracleThresholds { distance: 1.0, ..OracleThresholds::default() });
    let program = parse_program(musclelab::environments::default_program_text(TaskId::WalkerFlat)).unwrap();
    let traj = walker_path(&t, 300, |k| 0.1 * ((k + 1) as f64 / 100.0).min(1.0), |k| if k >= 99 { 0.5 } else { 0.0 });
    let d = desc(&t);
    assert!((oracle_score(&d, &traj, &t.context).unwrap() - 0.1).abs() < 1e-12);
    let fb = judge.critique(&d, &t.context, &traj, &program).unwrap();
    assert!(!fb.task_success);
    let shown: Vec<String> = fb.suggestions.iter().map(|s| s.to_string()).collect();
    // Rule table, in order: fall → balance and height; short distance → forward.
    assert_eq!(shown, ["increase balance", "increase height", "increase forward"]);
    assert!(fb.issues.contains("fell at t=1.00 s"));
    fb.check(&program).unwrap();
    assert_eq!(fb, judge.critique(&d, &t.context, &traj, &program).unwrap());
}

#[test]
fn missing_terms_are_added_from_templates() {
    let t = task(TaskId::WalkerFlat);
    let judge = OracleJudge::default();
    let program = parse_program("term forward { forward_velocity } @ 1").unwrap();
    // Leaning torso that never falls, with full effort on every actuator.
    let mut traj = crafted(&t, 50, |_, s0| {
        let mut s = s0.clone();
        s.joints.q[2] += 0.5;
        s
    });
    for st in &mut traj.steps {
        st.controls.iter_mut().for_each(|u| *u = 1.0);
    }
    let fb = judge.critique(&desc(&t), &t.context, &traj, &program).unwrap();
    let shown: Vec<String> = fb.suggestions.iter().map(|s| s.to_string()).collect();
    assert_eq!(
        shown,
        ["add torso_uprightness: torso_uprightness", "increase forward", "add effort at 0.2: effort"]
    );
    fb.check(&program).unwrap();
}

#[test]
fn accurate_manipulation_needs_nothing() {
    let t = task(TaskId::ArmReach);
    let judge = OracleJudge::default();
    let program = parse_program(musclelab::environments::default_program_text(TaskId::ArmReach)).unwrap();
    let traj = arm_with_object_error(&t, 0.001, 0.002);
    let fb = judge.critique(&desc(&t), &t.context, &traj, &program).unwrap();
    assert!(fb.task_success);
    assert!(fb.suggestions.is_empty());

    let off = arm_with_object_error(&t, 0.0, 0.6);
    let fb = judge.critique(&desc(&t), &t.context, &off, &program).unwrap();
    assert!(!fb.task_success);
    assert_eq!(fb.suggestions, vec![Suggestion::new(Action::Increase, "target_orientation")]);
}

#[test]
fn frame_counts_and_determinism() {
    let t = task(TaskId::WalkerFlat);
    let cfg = RenderConfig::default();
    let still = walker_path(&t, 1000, |_| 0.0, |_| 0.0);
    let frames = render_frames(&still, &t.context, &cfg).unwrap();
    assert_eq!(frames.len(), 100);
    assert!(frames.frames.iter().all(|f| f == &frames.frames[0]));
    let moving = walker_path(&t, 100, |k| k as f64 * 0.01, |_| 0.0);
    let a = render_frames(&moving, &t.context, &cfg).unwrap();
    assert_eq!(a.len(), 10);
    assert_eq!(a, render_frames(&moving.clone(), &t.context, &cfg).unwrap());
    let long = walker_path(&t, 2000, |_| 0.0, |_| 0.0);
    let l = render_frames(&long, &t.context, &cfg).unwrap();
    assert_eq!(l.len(), 100);
    assert!((l.rate - 5.0).abs() < 1e-12);
    let dims = (a.frames[0].width, a.frames[0].height);
    assert!(a.frames.iter().all(|f| (f.width, f.height) == dims));
    assert!(render_frames(&walker_path(&t, 0, |_| 0.0, |_| 0.0), &t.context, &cfg).is_err());
}

fn schema() -> jsonschema::Validator {
    jsonschema::validator_for(&serde_json::from_str(REQUEST_SCHEMA).unwrap()).unwrap()
}

fn endpoint(responses: &[&str]) -> (Arc<ScriptedTransport>, EndpointJudge) {
    let transport = Arc::new(ScriptedTransport::new(responses.iter().copied()));
    let judge = EndpointJudge::new(transport.clone(), "test-model");
    (transport, judge)
}

#[test]
fn endpoint_selection_with_retries() {
    let t = task(TaskId::WalkerFlat);
    let d = desc(&t);
    let a = walker_path(&t, 20, |k| k as f64 * 0.01, |_| 0.0);
    let b = walker_path(&t, 20, |_| 0.0, |_| 0.0);

    let (tr, judge) = endpoint(&["maybe", "The first one", "First. It moves further."]);
    let v = judge.compare(&d, &t.context, &a, Some(&b)).unwrap();
    assert_eq!(v.choice, Choice::First);
    let reqs = tr.requests.lock().unwrap();
    assert_eq!(reqs.len(), 3);
    assert!(reqs.iter().all(|r| r == &reqs[0]));
    let body = serde_json::to_value(&reqs[0]).unwrap();
    assert!(schema().is_valid(&body));
    // Prompt text, first label, two frames, second label, two frames.
    assert_eq!(body["messages"][0]["content"].as_array().unwrap().len(), 1 + 1 + 2 + 1 + 2);
    drop(reqs);

    let (tr, judge) = endpoint(&["unsure", "unsure", "unsure"]);
    let v = judge.compare(&d, &t.context, &a, Some(&b)).unwrap();
    assert_eq!(v.choice, Choice::Second);
    assert_eq!(tr.requests.lock().unwrap().len(), DEFAULT_PARSE_RETRIES);

    let (tr, judge) = endpoint(&[]);
    assert_eq!(judge.compare(&d, &t.context, &a, None).unwrap().choice, Choice::First);
    assert!(tr.requests.lock().unwrap().is_empty());
    assert!(matches!(judge.compare(&d, &t.context, &a, Some(&b)), Err(JudgeError::Transport(_))));
}

#[test]
fn endpoint_feedback_with_retries() {
    let t = task(TaskId::WalkerFlat);
    let d = desc(&t);
    let program: RewardProgram = parse_program(musclelab::environments::default_program_text(TaskId::WalkerFlat)).unwrap();
    let traj = walker_path(&t, 20, |k| k as f64 * 0.01, |_| 0.0);
    let (tr, judge) = endpoint(&[
        "It looks fine.",
        "SUCCESS: NO\nISSUES: drifts\nSUGGESTIONS:\n- increase balance\n- add calm at 0.5: -abs(joint_velocity(3))",
    ]);
    let fb = judge.critique(&d, &t.context, &traj, &program).unwrap();
    assert!(!fb.task_success);
    assert_eq!(fb.suggestions.len(), 2);
    let reqs = tr.requests.lock().unwrap();
    assert_eq!(reqs.len(), 2);
    let body = serde_json::to_value(&reqs[0]).unwrap();
    assert!(schema().is_valid(&body));
    let text = body["messages"][0]["content"][0]["text"].as_str().unwrap();
    assert!(text.contains("term balance { -balance } @ 1.0"));
    assert!(!text.contains('{') || musclelab::prompts::unfilled(text).is_empty());
    drop(reqs);

    let (_, judge) = endpoint(&["unclear", "hard to say", "maybe"]);
    assert!(matches!(judge.critique(&d, &t.context, &traj, &program), Err(JudgeError::Parse { attempts: 3, .. })));
}

#[test]
fn schema_rejects_malformed_bodies() {
    let v = schema();
    assert!(!v.is_valid(&serde_json::json!({"model": "m", "messages": [], "temperature": 0.0})));
    assert!(!v.is_valid(&serde_json::json!({
        "model": "m", "temperature": 0.0,
        "messages": [{"role": "user", "content": [{"type": "image_url", "image_url": {"url": "http://x"}}]}]
    })));
    assert!(!v.is_valid(&serde_json::json!({
        "model": "m", "temperature": 0.0, "stream": true,
        "messages": [{"role": "user", "content": [{"type": "text", "text": "hi"}]}]
    })));
}
