//! The outer search: roll out candidate reward programs under the planner,
//! keep the best rollout as the incumbent, review it and propose the next
//! candidates.
//!
//! A run directory looks like this:
//!
//! ```text
//! config.json          RunConfig
//! initial.reward       starting program
//! history.json         RunHistory, rewritten after every iteration
//! timing.json          wall-clock seconds per iteration
//! iter_0000/
//!   proposal_00.reward proposal_00.csv  proposal_00_frames/frame_0000.png ...
//!   verdict_00.json    feedback.json    incumbent.reward
//! transcripts/         judge.jsonl, synthesis.jsonl (endpoint modes only)
//! heatmap.csv heatmap.svg
//! ```
//!
//! Everything in `history.json` is a pure function of the configuration
//! (and, in endpoint modes, the transcripts); wall-clock times live in
//! `timing.json` only.

mod heatmap;

pub use heatmap::{export_heatmap, heatmap_svg, read_heatmap_csv, write_heatmap_csv, HeatmapFiles};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::MpcPolicy;
use crate::dynamics::{read_trajectory_csv, rollout, write_trajectory_csv};
use crate::environments::{build_task, default_program_text, TaskId};
use crate::judge::{
    oracle_score, Choice, EndpointJudge, Feedback, Judge, JudgeError, MotionDescription, OracleJudge, OracleThresholds,
    Verdict,
};
use crate::render::{render_frames, RenderConfig};
use crate::reward::{parse_program, RewardProgram};
use crate::synthesis::{
    validate, EndpointSynthesizer, MockSynthesizer, Provenance, SynthesisContext, SynthesisError, Synthesizer,
    DEFAULT_MAX_WEIGHT,
};
use crate::transport::{ChatTransport, RecordingTransport, TransportError};
use crate::{PlannerConfig, Task, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeMode {
    Oracle,
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    Mock,
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    /// Task construction (terrain, initial jitter).
    pub sim: u64,
    pub planner: u64,
    pub synthesis: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self { sim: seed, planner: seed, synthesis: seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task_id: TaskId,
    pub iterations: usize,
    pub samples_per_iter: usize,
    pub seeds: Seeds,
    pub judge: JudgeMode,
    pub synthesis: SynthMode,
    /// Starting program; the task's default when absent.
    #[serde(default)]
    pub initial_program: Option<PathBuf>,
    /// Episode length (s); the task's default when absent.
    #[serde(default)]
    pub horizon_s: Option<f64>,
    /// Planner settings; the task's preset when absent.
    #[serde(default)]
    pub planner: Option<PlannerConfig>,
    #[serde(default = "default_max_weight")]
    pub max_weight: f64,
    #[serde(default)]
    pub thresholds: OracleThresholds,
    /// Model name sent to the endpoint. Taken from the environment when absent.
    #[serde(default)]
    pub model: Option<String>,
    /// Model for synthesis when it differs from the judge's.
    #[serde(default)]
    pub synth_model: Option<String>,
    /// Route judging and synthesis to the same model.
    #[serde(default)]
    pub unified_endpoint: bool,
}

fn default_max_weight() -> f64 {
    DEFAULT_MAX_WEIGHT
}

impl RunConfig {
    pub fn new(task_id: TaskId) -> Self {
        Self {
            task_id,
            iterations: 8,
            samples_per_iter: 4,
            seeds: Seeds::all(0),
            judge: JudgeMode::Oracle,
            synthesis: SynthMode::Mock,
            initial_program: None,
            horizon_s: None,
            planner: None,
            max_weight: DEFAULT_MAX_WEIGHT,
            thresholds: OracleThresholds::default(),
            model: None,
            synth_model: None,
            unified_endpoint: false,
        }
    }

    pub fn validate(&self) -> Result<(), LoopError> {
        let bad = |m: &str| Err(LoopError::Config(m.into()));
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if self.samples_per_iter < 1 {
            return bad("samples_per_iter must be at least 1");
        }
        if !(self.max_weight > 0.0) || !self.max_weight.is_finite() {
            return bad("max_weight must be positive");
        }
        if let Some(h) = self.horizon_s {
            if !(h > 0.0) || !h.is_finite() {
                return bad("horizon_s must be positive");
            }
        }
        if let Some(p) = &self.planner {
            p.validate().map_err(|e| LoopError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_task(&self) -> Task {
        let mut task: Task = build_task(self.task_id, self.seeds.sim);
        if let Some(h) = self.horizon_s {
            task.spec.horizon_s = h;
        }
        if let Some(p) = &self.planner {
            task.planner = p.clone();
        }
        task
    }
}

/// JSON has no infinities or NaN; those are written as strings.
mod lossless_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&format!("{x}"))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub index: usize,
    pub provenance: Provenance,
    pub attempts: usize,
    pub program_file: String,
    pub trajectory_file: String,
    pub frames_dir: String,
    pub frame_count: usize,
    pub verdict_file: String,
    pub verdict: Verdict,
    #[serde(with = "lossless_f64")]
    pub oracle_score: f64,
    #[serde(with = "lossless_f64")]
    pub total_reward: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncumbentRef {
    /// Iteration and proposal that produced the incumbent.
    pub iteration: usize,
    pub proposal: usize,
    pub program_file: String,
    pub trajectory_file: String,
    pub program: String,
    #[serde(with = "lossless_f64")]
    pub oracle_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub proposals: Vec<ProposalRecord>,
    pub incumbent: IncumbentRef,
    pub feedback: Feedback,
    pub feedback_file: String,
    /// Programs to evaluate in the next iteration; empty after the last one.
    pub next_programs: Vec<NextProgram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextProgram {
    pub program: String,
    pub provenance: Provenance,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Completed,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub config: RunConfig,
    pub status: RunStatus,
    pub iterations: Vec<IterationRecord>,
    pub final_program: Option<String>,
}

impl RunHistory {
    /// Incumbent oracle score after each iteration.
    pub fn incumbent_scores(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.incumbent.oracle_score).collect()
    }

    pub fn incumbent_programs(&self) -> Result<Vec<RewardProgram>, LoopError> {
        self.iterations
            .iter()
            .map(|r| {
                parse_program(&r.incumbent.program)
                    .map_err(|e| LoopError::Corrupt { record: r.index, detail: format!("incumbent program: {e}") })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub iteration_seconds: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoopError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("output directory {0} is not empty; resume it or pick another")]
    NotEmpty(PathBuf),
    #[error("initial program: {0}")]
    InitialProgram(String),
    #[error("judge: {0}")]
    Judge(#[from] JudgeError),
    #[error("synthesis: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("rollout of proposal {proposal} in iteration {iteration}: {detail}")]
    Rollout { iteration: usize, proposal: usize, detail: String },
    #[error("corrupt history at record {record}: {detail}")]
    Corrupt { record: usize, detail: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl LoopError {
    /// Whether the endpoint transport caused the failure.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            LoopError::Transport(_)
                | LoopError::Judge(JudgeError::Transport(_))
                | LoopError::Synthesis(SynthesisError::Transport(_))
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LoopError + '_ {
    move |source| LoopError::Io { path: path.to_path_buf(), source }
}

/// Writes through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LoopError> {
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp).and_then(|mut f| f.write_all(bytes)).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<(), LoopError> {
    let mut s = serde_json::to_string_pretty(value).expect("run records serialize");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn read_json<V: for<'de> Deserialize<'de>>(path: &Path) -> Result<V, LoopError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| LoopError::Json { path: path.to_path_buf(), source })
}

/// Mixes a base seed with indices; distinct index tuples give unrelated streams.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(splitmix(base), |h, p| splitmix(h ^ splitmix(*p)))
}

/// The judge and synthesizer a run uses.
pub struct Agents {
    pub judge: Box<dyn Judge>,
    pub synthesizer: Box<dyn Synthesizer>,
}

impl Agents {
    /// Builds agents for the configured modes. Endpoint traffic goes through
    /// `endpoint` and is recorded under `run_dir/transcripts`.
    pub fn for_config(
        config: &RunConfig,
        run_dir: &Path,
        endpoint: Option<Arc<dyn ChatTransport>>,
    ) -> Result<Self, LoopError> {
        let needs_endpoint = config.judge == JudgeMode::Endpoint || config.synthesis == SynthMode::Endpoint;
        let endpoint = match (needs_endpoint, endpoint) {
            (false, _) => None,
            (true, Some(e)) => Some(e),
            (true, None) => {
                let cfg = crate::transport::EndpointConfig::from_env()?;
                Some(Arc::new(crate::transport::HttpTransport::new(cfg)?) as Arc<dyn ChatTransport>)
            }
        };
        let model = || {
            config
                .model
                .clone()
                .or_else(|| std::env::var(crate::transport::ENV_MODEL).ok())
                .ok_or(LoopError::Transport(TransportError::NotConfigured(crate::transport::ENV_MODEL)))
        };
        let transcripts = run_dir.join("transcripts");
        let judge: Box<dyn Judge> = match config.judge {
            JudgeMode::Oracle => Box::new(OracleJudge::new(config.thresholds.clone())),
            JudgeMode::Endpoint => {
                let t = RecordingTransport::new(endpoint.clone().expect("endpoint set"), transcripts.join("judge.jsonl"));
                Box::new(EndpointJudge::new(Arc::new(t), model()?))
            }
        };
        let synthesizer: Box<dyn Synthesizer> = match config.synthesis {
            SynthMode::Mock => Box::new(MockSynthesizer::default()),
            SynthMode::Endpoint => {
                let t = RecordingTransport::new(endpoint.expect("endpoint set"), transcripts.join("synthesis.jsonl"));
                let m = match (&config.synth_model, config.unified_endpoint) {
                    (Some(m), false) => m.clone(),
                    _ => model()?,
                };
                Box::new(EndpointSynthesizer::new(Arc::new(t), m))
            }
        };
        Ok(Self { judge, synthesizer })
    }
}

struct Incumbent {
    reference: IncumbentRef,
    trajectory: Trajectory,
}

fn iter_dir(i: usize) -> String {
    format!("iter_{i:04}")
}

fn initial_program_text(config: &RunConfig) -> Result<String, LoopError> {
    match &config.initial_program {
        Some(p) => fs::read_to_string(p).map_err(|e| LoopError::InitialProgram(format!("{}: {e}", p.display()))),
        None => Ok(default_program_text(config.task_id).to_string()),
    }
}

fn roll_out(task: &Task, program: &RewardProgram, seed: u64) -> Result<Trajectory, String> {
    let mut policy = MpcPolicy::new(program.clone(), task.context.clone(), task.sim.clone(), task.planner.clone(), seed)
        .map_err(|e| e.to_string())?;
    rollout(&mut policy, &task.context, &task.initial_state, task.horizon_steps(), &task.sim, program)
        .map_err(|e| e.to_string())
}

/// Runs a fresh search into `run_dir`, which must be empty or absent.
pub fn run(config: &RunConfig, run_dir: &Path, agents: &Agents) -> Result<RunHistory, LoopError> {
    run_for(config, run_dir, agents, usize::MAX)
}

/// Like [`run`] but stops after `max_new` iterations, leaving a resumable directory.
pub fn run_for(config: &RunConfig, run_dir: &Path, agents: &Agents, max_new: usize) -> Result<RunHistory, LoopError> {
    config.validate()?;
    if run_dir.exists() && fs::read_dir(run_dir).map_err(io_err(run_dir))?.next().is_some() {
        return Err(LoopError::NotEmpty(run_dir.to_path_buf()));
    }
    let text = initial_program_text(config)?;
    let initial = parse_program(&text).map_err(|e| LoopError::InitialProgram(e.to_string()))?;
    let task = config.build_task();
    validate(&initial, &task, config.max_weight).map_err(LoopError::InitialProgram)?;
    fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    write_json(&run_dir.join("config.json"), config)?;
    write_atomic(&run_dir.join("initial.reward"), initial.to_text().as_bytes())?;
    let mut history =
        RunHistory { config: config.clone(), status: RunStatus::Running, iterations: Vec::new(), final_program: None };
    write_json(&run_dir.join("history.json"), &history)?;
    write_json(&run_dir.join("timing.json"), &Timing::default())?;
    drive(&mut history, &task, run_dir, agents, None, max_new)?;
    Ok(history)
}

/// Continues a run directory from its last completed iteration.
pub fn resume(run_dir: &Path, agents: &Agents) -> Result<RunHistory, LoopError> {
    resume_for(run_dir, agents, usize::MAX)
}

pub fn resume_for(run_dir: &Path, agents: &Agents, max_new: usize) -> Result<RunHistory, LoopError> {
    let mut history = load_history(run_dir)?;
    let task = history.config.build_task();
    check_history(&history, run_dir)?;
    if history.iterations.len() >= history.config.iterations {
        return Ok(history);
    }
    let incumbent = match history.iterations.last() {
        Some(r) => {
            let path = run_dir.join(&r.incumbent.trajectory_file);
            let file = fs::File::open(&path).map_err(|e| LoopError::Corrupt {
                record: r.index,
                detail: format!("{}: {e}", r.incumbent.trajectory_file),
            })?;
            let trajectory =
                read_trajectory_csv(file, &task.context, &task.initial_state, task.sim.control_dt()).map_err(|e| {
                    LoopError::Corrupt { record: r.index, detail: format!("{}: {e}", r.incumbent.trajectory_file) }
                })?;
            Some(Incumbent { reference: r.incumbent.clone(), trajectory })
        }
        None => None,
    };
    history.status = RunStatus::Running;
    drive(&mut history, &task, run_dir, agents, incumbent, max_new)?;
    Ok(history)
}

pub fn load_history(run_dir: &Path) -> Result<RunHistory, LoopError> {
    read_json(&run_dir.join("history.json"))
}

/// Checks record numbering and that every referenced file exists.
pub fn check_history(history: &RunHistory, run_dir: &Path) -> Result<(), LoopError> {
    for (i, r) in history.iterations.iter().enumerate() {
        let corrupt = |detail: String| LoopError::Corrupt { record: i, detail };
        if r.index != i {
            return Err(corrupt(format!("index {} out of sequence", r.index)));
        }
        let mut files = vec![&r.feedback_file, &r.incumbent.program_file, &r.incumbent.trajectory_file];
        for p in &r.proposals {
            files.extend([&p.program_file, &p.trajectory_file, &p.verdict_file, &p.frames_dir]);
        }
        if let Some(missing) = files.into_iter().find(|f| !run_dir.join(f).exists()) {
            return Err(corrupt(format!("missing file {missing}")));
        }
        parse_program(&r.incumbent.program).map_err(|e| corrupt(format!("incumbent program: {e}")))?;
        for n in &r.next_programs {
            parse_program(&n.program).map_err(|e| corrupt(format!("next program: {e}")))?;
        }
    }
    Ok(())
}

fn drive(
    history: &mut RunHistory,
    task: &Task,
    run_dir: &Path,
    agents: &Agents,
    mut incumbent: Option<Incumbent>,
    max_new: usize,
) -> Result<(), LoopError> {
    let config = history.config.clone();
    let desc = MotionDescription::for_task(task);
    let timing_path = run_dir.join("timing.json");
    let mut timing: Timing = read_json(&timing_path).unwrap_or_default();
    let start = history.iterations.len();
    let end = config.iterations.min(start.saturating_add(max_new));
    for i in start..end {
        let t0 = Instant::now();
        let result = iteration(history, task, &desc, run_dir, agents, incumbent.take(), i);
        match result {
            Ok((record, inc)) => {
                history.iterations.push(record);
                incumbent = Some(inc);
            }
            Err(e) => {
                history.status = RunStatus::Failed { error: e.to_string() };
                write_json(&run_dir.join("history.json"), history)?;
                return Err(e);
            }
        }
        timing.iteration_seconds.truncate(i);
        timing.iteration_seconds.push(t0.elapsed().as_secs_f64());
        if history.iterations.len() == config.iterations {
            history.status = RunStatus::Completed;
            history.final_program = history.iterations.last().map(|r| r.incumbent.program.clone());
        }
        write_json(&run_dir.join("history.json"), history)?;
        write_json(&timing_path, &timing)?;
    }
    if history.status == RunStatus::Completed {
        export_heatmap(history, run_dir)?;
    }
    Ok(())
}

fn iteration(
    history: &RunHistory,
    task: &Task,
    desc: &MotionDescription,
    run_dir: &Path,
    agents: &Agents,
    incumbent: Option<Incumbent>,
    i: usize,
) -> Result<(IterationRecord, Incumbent), LoopError> {
    let config = &history.config;
    let dir_name = iter_dir(i);
    let dir = run_dir.join(&dir_name);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let candidates: Vec<(RewardProgram, Provenance, usize)> = match history.iterations.last() {
        Some(prev) => prev
            .next_programs
            .iter()
            .map(|n| {
                let p = parse_program(&n.program)
                    .map_err(|e| LoopError::Corrupt { record: prev.index, detail: format!("next program: {e}") })?;
                Ok((p, n.provenance, n.attempts))
            })
            .collect::<Result<_, LoopError>>()?,
        None => {
            let text = fs::read_to_string(run_dir.join("initial.reward")).map_err(io_err(run_dir))?;
            let initial = parse_program(&text).map_err(|e| LoopError::InitialProgram(e.to_string()))?;
            let mut out = vec![(initial.clone(), Provenance::Initial, 0)];
            if config.samples_per_iter > 1 {
                let ctx = SynthesisContext {
                    description: desc.clone(),
                    task,
                    feedback: Feedback {
                        task_success: false,
                        issues: "no rollout has been reviewed yet".into(),
                        suggestions: Vec::new(),
                    },
                    incumbent: initial,
                    history: Vec::new(),
                    max_weight: config.max_weight,
                };
                let seed = derive_seed(config.seeds.synthesis, &[0, 0]);
                for p in agents.synthesizer.propose(&ctx, config.samples_per_iter - 1, seed)? {
                    out.push((p.program, p.provenance, p.attempts));
                }
            }
            out
        }
    };

    let candidates: Vec<(RewardProgram, Provenance, usize)> = candidates
        .into_iter()
        .map(|(mut p, prov, a)| {
            p.stage_id = i;
            (p, prov, a)
        })
        .collect();
    let rollouts: Vec<Result<Trajectory, String>> = candidates
        .par_iter()
        .enumerate()
        .map(|(k, (p, _, _))| roll_out(task, p, derive_seed(config.seeds.planner, &[i as u64, k as u64])))
        .collect();

    let render = RenderConfig::default();
    let mut incumbent = incumbent;
    let mut proposals = Vec::with_capacity(candidates.len());
    for (k, ((program, provenance, attempts), traj)) in candidates.iter().zip(rollouts).enumerate() {
        let traj = traj.map_err(|detail| LoopError::Rollout { iteration: i, proposal: k, detail })?;
        let stem = format!("proposal_{k:02}");
        let program_file = format!("{dir_name}/{stem}.reward");
        let trajectory_file = format!("{dir_name}/{stem}.csv");
        let frames_dir = format!("{dir_name}/{stem}_frames");
        let verdict_file = format!("{dir_name}/verdict_{k:02}.json");
        write_atomic(&run_dir.join(&program_file), program.to_text().as_bytes())?;
        let mut csv = Vec::new();
        write_trajectory_csv(&traj, &task.context, &mut csv)
            .map_err(|e| LoopError::Rollout { iteration: i, proposal: k, detail: e.to_string() })?;
        write_atomic(&run_dir.join(&trajectory_file), &csv)?;
        let frames = render_frames(&traj, &task.context, &render).map_err(JudgeError::from)?;
        let fdir = run_dir.join(&frames_dir);
        fs::create_dir_all(&fdir).map_err(io_err(&fdir))?;
        for (n, f) in frames.frames.iter().enumerate() {
            write_atomic(&fdir.join(format!("frame_{n:04}.png")), &f.to_png())?;
        }

        let verdict = agents.judge.compare(desc, &task.context, &traj, incumbent.as_ref().map(|c| &c.trajectory))?;
        write_json(&run_dir.join(&verdict_file), &verdict)?;
        let score = oracle_score(desc, &traj, &task.context)?;
        if verdict.choice == Choice::First {
            incumbent = Some(Incumbent {
                reference: IncumbentRef {
                    iteration: i,
                    proposal: k,
                    program_file: program_file.clone(),
                    trajectory_file: trajectory_file.clone(),
                    program: program.to_text(),
                    oracle_score: score,
                },
                trajectory: traj.clone(),
            });
        }
        proposals.push(ProposalRecord {
            index: k,
            provenance: *provenance,
            attempts: *attempts,
            program_file,
            trajectory_file,
            frames_dir,
            frame_count: frames.len(),
            verdict_file,
            verdict,
            oracle_score: score,
            total_reward: traj.total_reward(),
            truncated: traj.truncated,
        });
    }
    let incumbent = incumbent.expect("the first comparison without an incumbent always succeeds");
    let inc_program = parse_program(&incumbent.reference.program).expect("written by to_text");
    write_atomic(&dir.join("incumbent.reward"), incumbent.reference.program.as_bytes())?;

    let feedback = agents.judge.critique(desc, &task.context, &incumbent.trajectory, &inc_program)?;
    let feedback_file = format!("{dir_name}/feedback.json");
    write_json(&run_dir.join(&feedback_file), &feedback)?;

    let mut next_programs = Vec::new();
    if i + 1 < config.iterations {
        let mut past = history.incumbent_programs()?;
        past.push(inc_program.clone());
        let ctx = SynthesisContext {
            description: desc.clone(),
            task,
            feedback: feedback.clone(),
            incumbent: inc_program,
            history: past,
            max_weight: config.max_weight,
        };
        let seed = derive_seed(config.seeds.synthesis, &[i as u64 + 1, 0]);
        for p in agents.synthesizer.propose(&ctx, config.samples_per_iter, seed)? {
            next_programs.push(NextProgram { program: p.program.to_text(), provenance: p.provenance, attempts: p.attempts });
        }
    }

    let record = IterationRecord {
        index: i,
        proposals,
        incumbent: incumbent.reference.clone(),
        feedback,
        feedback_file,
        next_programs,
    };
    Ok((record, incumbent))
}
