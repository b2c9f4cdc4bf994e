mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};

use args::*;
use musclelab::controller::MpcPolicy;
use musclelab::dynamics::{read_trajectory_csv, rollout, write_trajectory_csv, ConstantPolicy, ZeroPolicy};
use musclelab::environments::{build_task, default_program_text, TaskId};
use musclelab::judge::{locomotion_report, manipulation_errors, oracle_score, MotionDescription};
use musclelab::learn::{self, Agents, JudgeMode, LoopError, RunConfig, RunHistory, Seeds, SynthMode};
use musclelab::render::{render_frames, FrameSequence, RenderConfig};
use musclelab::reward::{parse_program, probe_eval, RewardProgram};
use musclelab::transport::{ChatTransport, ReplayTransport};
use musclelab::{Task, Trajectory};

/// A failure together with the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
    Transport(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Transport(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) | Failure::Transport(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<LoopError> for Failure {
    fn from(e: LoopError) -> Self {
        let flat = anyhow!("{e}");
        if e.is_transport() {
            return Failure::Transport(flat);
        }
        match e {
            LoopError::Config(_) | LoopError::NotEmpty(_) | LoopError::InitialProgram(_) => Failure::Usage(flat),
            _ => Failure::Runtime(flat),
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Plan(a) => plan(a),
        Command::Learn(a) => learn_cmd(a, matches.subcommand_matches("learn").expect("learn matched")),
        Command::ExportHeatmap(a) => export_heatmap(a),
        Command::Render(a) => render(a),
        Command::Tasks(a) => tasks(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn task_id(name: &str) -> Result<TaskId, Failure> {
    name.parse().map_err(|_| {
        let known: Vec<&str> = TaskId::ALL.iter().map(|t| t.as_str()).collect();
        usage(format!("unknown task `{name}`; known tasks: {}", known.join(", ")))
    })
}

fn load_task(a: &TaskArgs) -> Result<Task, Failure> {
    Ok(build_task(task_id(&a.task)?, a.seed))
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Reads and checks a program against the task; the default program when `path` is `None`.
fn load_program(path: Option<&Path>, task: &Task) -> Result<RewardProgram, Failure> {
    let (text, origin) = match path {
        Some(p) => (read_input(p)?, p.display().to_string()),
        None => (default_program_text(task.id()).to_string(), "default program".into()),
    };
    let program = parse_program(&text).map_err(|e| anyhow!("{origin}: {e}"))?;
    probe_eval(&program, task).map_err(|e| anyhow!("{origin}: {e}"))?;
    Ok(program)
}

fn render_config(f: &FrameArgs) -> RenderConfig {
    RenderConfig { width: f.width, height: f.height, rate: f.rate, max_frames: f.max_frames }
}

fn write_frames(frames: &FrameSequence, dir: &Path, format: ImageFormat) -> Result<usize, Failure> {
    if dir.exists() {
        fs::remove_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    let names = match format {
        ImageFormat::Png => frames.write_png_dir(dir),
        ImageFormat::Ppm => frames.write_ppm_dir(dir),
    }
    .with_context(|| dir.display().to_string())?;
    Ok(names.len())
}

/// Writes `trajectory.csv` and `frames/` under `out`.
fn write_rollout(traj: &Trajectory, task: &Task, out: &Path, frames: &FrameArgs) -> Result<(PathBuf, usize), Failure> {
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    let csv = out.join("trajectory.csv");
    let file = fs::File::create(&csv).with_context(|| csv.display().to_string())?;
    write_trajectory_csv(traj, &task.context, file).with_context(|| csv.display().to_string())?;
    let seq = render_frames(traj, &task.context, &render_config(frames)).map_err(|e| anyhow!("render: {e}"))?;
    let n = write_frames(&seq, &out.join("frames"), ImageFormat::Png)?;
    Ok((csv, n))
}

fn read_controls(path: &Path, n: usize) -> Result<Vec<f64>, Failure> {
    let text = read_input(path)?;
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| usage(format!("{}: `{s}` is not a number", path.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != n {
        return Err(usage(format!("{}: expected {n} commands, found {}", path.display(), values.len())));
    }
    Ok(values)
}

fn simulate(a: SimulateArgs) -> Outcome {
    let task = load_task(&a.task)?;
    let program = load_program(a.program.as_deref(), &task)?;
    let steps = a.steps.unwrap_or_else(|| task.horizon_steps());
    if steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let n = task.morphology().n_muscles();
    let traj = match &a.controls {
        Some(p) => {
            let u = read_controls(p, n)?;
            rollout(&mut ConstantPolicy(u), &task.context, &task.initial_state, steps, &task.sim, &program)
        }
        None => rollout(&mut ZeroPolicy(n), &task.context, &task.initial_state, steps, &task.sim, &program),
    }
    .context("rollout")?;
    let (csv, frames) = write_rollout(&traj, &task, &a.out, &a.frames)?;
    println!("rows: {}", traj.len());
    if traj.truncated {
        println!("truncated: state became non-finite");
    }
    println!("total reward: {:?}", traj.total_reward());
    println!("trajectory: {}", csv.display());
    println!("frames: {frames}");
    Ok(())
}

fn plan(a: PlanArgs) -> Outcome {
    let mut task = load_task(&a.task)?;
    let program = load_program(a.program.as_deref(), &task)?;
    if let Some(d) = a.duration {
        if !(d > 0.0) || !d.is_finite() {
            return Err(usage("--duration must be positive"));
        }
        task.spec.horizon_s = d;
    }
    let steps = task.horizon_steps().max(1);
    let p = &mut task.planner;
    if let Some(v) = a.horizon {
        p.horizon = v;
    }
    if let Some(v) = a.n_samples {
        p.n_samples = v;
    }
    if let Some(v) = a.noise_sigma {
        p.noise_sigma = v;
    }
    if let Some(v) = a.temperature {
        p.temperature = v;
    }
    if let Some(v) = a.instant_fraction {
        p.instant_fraction = v;
    }
    if let Some(v) = a.replan_interval {
        p.replan_interval = v;
    }
    if let Some(v) = a.k_bar {
        p.k_bar = v;
    }
    let mut policy = MpcPolicy::new(
        program.clone(),
        task.context.clone(),
        task.sim.clone(),
        task.planner.clone(),
        a.task.seed,
    )
    .map_err(|e| usage(format!("planner: {e}")))?;
    let traj = rollout(&mut policy, &task.context, &task.initial_state, steps, &task.sim, &program).context("rollout")?;
    let (csv, frames) = write_rollout(&traj, &task, &a.out, &a.frames)?;
    let desc = MotionDescription::for_task(&task);
    let score = oracle_score(&desc, &traj, &task.context).map_err(|e| anyhow!("score: {e}"))?;
    let mut report = serde_json::json!({
        "task": task.id().as_str(),
        "seed": a.task.seed,
        "steps": traj.len(),
        "truncated": traj.truncated,
        "total_reward": traj.total_reward(),
        "oracle_score": score,
    });
    println!("oracle score: {score:.6}");
    if task.id().is_manipulation() {
        let (pos, orient) = manipulation_errors(&traj, &task.context);
        println!("position error: {pos:.6} m");
        println!("orientation error: {orient:.6} rad");
        report["position_error"] = pos.into();
        report["orientation_error"] = orient.into();
    } else {
        let r = locomotion_report(&traj, &task.context);
        println!("distance: {:.6} m", r.displacement);
        if let Some(t) = r.fall_time {
            println!("fell at: {t:.2} s");
        }
        report["distance"] = r.displacement.into();
        report["fall_time"] = r.fall_time.into();
    }
    let score_path = a.out.join("score.json");
    fs::write(&score_path, format!("{}\n", serde_json::to_string_pretty(&report).expect("json")))
        .with_context(|| score_path.display().to_string())?;
    println!("trajectory: {}", csv.display());
    println!("frames: {frames}");
    Ok(())
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Builds the run configuration: `--config` if given, then explicit flags on top.
fn learn_config(a: &LearnArgs, m: &ArgMatches) -> Result<RunConfig, Failure> {
    let mut c = match &a.config {
        Some(p) => serde_json::from_str(&read_input(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => RunConfig::new(task_id(a.task.as_deref().expect("required by clap"))?),
    };
    let base = a.config.is_none();
    let set = |id: &str| base || explicit(m, id);
    if let Some(t) = &a.task {
        c.task_id = task_id(t)?;
    }
    if set("judge") {
        c.judge = match a.judge {
            JudgeArg::Oracle => JudgeMode::Oracle,
            JudgeArg::Endpoint => JudgeMode::Endpoint,
        };
    }
    if set("synth") {
        c.synthesis = match a.synth {
            SynthArg::Mock => SynthMode::Mock,
            SynthArg::Endpoint => SynthMode::Endpoint,
        };
    }
    if set("iters") {
        c.iterations = a.iters;
    }
    if set("samples") {
        c.samples_per_iter = a.samples;
    }
    if set("seed") {
        c.seeds = Seeds::all(a.seed);
    }
    if set("max_weight") {
        c.max_weight = a.max_weight;
    }
    if set("unified_endpoint") {
        c.unified_endpoint = a.unified_endpoint;
    }
    if let Some(p) = &a.initial {
        if !p.is_file() {
            return Err(usage(format!("{}: no such file", p.display())));
        }
        c.initial_program = Some(p.clone());
    }
    if a.horizon_s.is_some() {
        c.horizon_s = a.horizon_s;
    }
    if a.model.is_some() {
        c.model = a.model.clone();
    }
    if a.synth_model.is_some() {
        c.synth_model = a.synth_model.clone();
    }
    c.validate()?;
    Ok(c)
}

fn print_history(h: &RunHistory, out: &Path) {
    println!("iteration  incumbent_score  proposal");
    for r in &h.iterations {
        println!("{:>9}  {:>15.6}  {}/{}", r.index, r.incumbent.oracle_score, r.incumbent.iteration, r.incumbent.proposal);
    }
    if let Some(last) = h.iterations.last() {
        println!("final program: {}", out.join(&last.incumbent.program_file).display());
    }
}

fn learn_cmd(a: LearnArgs, m: &ArgMatches) -> Outcome {
    let endpoint: Option<Arc<dyn ChatTransport>> = match &a.replay {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(usage(format!("{}: not a directory", dir.display())));
            }
            Some(Arc::new(ReplayTransport::from_dir(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?))
        }
        None => None,
    };
    let history = if a.resume {
        if !a.out.join("history.json").is_file() {
            return Err(usage(format!("{}: no run to resume", a.out.display())));
        }
        let config = learn::load_history(&a.out)?.config;
        let agents = Agents::for_config(&config, &a.out, endpoint)?;
        learn::resume(&a.out, &agents)?
    } else {
        let config = learn_config(&a, m)?;
        if a.out.exists() && fs::read_dir(&a.out).map(|mut d| d.next().is_some()).unwrap_or(true) {
            return Err(LoopError::NotEmpty(a.out.clone()).into());
        }
        let agents = Agents::for_config(&config, &a.out, endpoint)?;
        learn::run(&config, &a.out, &agents)?
    };
    print_history(&history, &a.out);
    Ok(())
}

fn export_heatmap(a: HeatmapArgs) -> Outcome {
    if !a.run.join("history.json").is_file() {
        return Err(usage(format!("{}: no history.json", a.run.display())));
    }
    let history = learn::load_history(&a.run)?;
    if history.iterations.is_empty() {
        return Err(Failure::Runtime(anyhow!("{}: run has no completed iterations", a.run.display())));
    }
    let out = a.out.unwrap_or_else(|| a.run.clone());
    fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
    let files = learn::export_heatmap(&history, &out)?;
    println!("stages: {}", history.iterations.len());
    println!("csv: {}", files.csv.display());
    println!("svg: {}", files.svg.display());
    Ok(())
}

fn render(a: RenderArgs) -> Outcome {
    let task = load_task(&a.task)?;
    let file = fs::File::open(&a.trajectory).map_err(|e| usage(format!("{}: {e}", a.trajectory.display())))?;
    let traj = read_trajectory_csv(file, &task.context, &task.initial_state, task.sim.control_dt())
        .map_err(|e| anyhow!("{}: {e}", a.trajectory.display()))?;
    let seq = render_frames(&traj, &task.context, &render_config(&a.frames)).map_err(|e| anyhow!("render: {e}"))?;
    let n = write_frames(&seq, &a.out, a.format)?;
    println!("frames: {n}");
    println!("rate: {:?}", seq.rate);
    Ok(())
}

fn tasks(a: TasksArgs) -> Outcome {
    let all: Vec<Task> = TaskId::ALL.iter().map(|&id| build_task(id, 0)).collect();
    if a.json {
        let specs: Vec<_> = all.iter().map(|t| &t.spec).collect();
        println!("{}", serde_json::to_string_pretty(&specs).expect("json"));
        return Ok(());
    }
    for t in &all {
        let m = t.morphology();
        println!(
            "{:<15} dof={} muscles={:<2} horizon={}s  {}",
            t.id().as_str(),
            m.dof(),
            m.n_muscles(),
            t.spec.horizon_s,
            t.spec.motion_description
        );
    }
    Ok(())
}
