use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Muscle-driven planar bodies: simulate, plan and search for reward programs.
///
/// Endpoint modes read MUSCLELAB_ENDPOINT_URL, MUSCLELAB_MODEL,
/// MUSCLELAB_API_KEY and MUSCLELAB_TIMEOUT_S (default 120) from the environment.
///
/// Exit codes: 0 ok, 1 usage or missing input, 2 runtime failure, 3 endpoint transport failure.
#[derive(Debug, Parser)]
#[command(name = "musclelab", version)]
pub struct Cli {
    /// More log output; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Worker threads for parallel rollouts [default: all cores].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out a fixed control signal and write the trajectory and frames.
    Simulate(SimulateArgs),
    /// Run the posture-space planner on one reward program and score the rollout.
    Plan(PlanArgs),
    /// Search for a reward program with a judge and a synthesizer.
    Learn(LearnArgs),
    /// Write the term-by-iteration weight heatmap of a run.
    ExportHeatmap(HeatmapArgs),
    /// Render frames from a stored trajectory CSV.
    Render(RenderArgs),
    /// List the available tasks.
    Tasks(TasksArgs),
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Task id (see `musclelab tasks`).
    #[arg(long)]
    pub task: String,

    /// Seed for the initial-state perturbation (and the planner, for plan).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Frame width in pixels.
    #[arg(long, default_value_t = 320)]
    pub width: usize,

    /// Frame height in pixels.
    #[arg(long, default_value_t = 200)]
    pub height: usize,

    /// Frames per simulated second.
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,

    /// Upper bound on frames; longer clips are sampled more sparsely.
    #[arg(long, default_value_t = 100)]
    pub max_frames: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub task: TaskArgs,

    /// Reward program whose terms are recorded [default: the task's starting program].
    #[arg(long)]
    pub program: Option<PathBuf>,

    /// Control steps to simulate [default: the task horizon].
    #[arg(long)]
    pub steps: Option<usize>,

    /// File with one constant command per muscle, separated by whitespace or commas [default: all zero].
    #[arg(long)]
    pub controls: Option<PathBuf>,

    /// Output directory for trajectory.csv and frames/.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub frames: FrameArgs,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub task: TaskArgs,

    /// Reward program to optimize [default: the task's starting program].
    #[arg(long)]
    pub program: Option<PathBuf>,

    /// Simulated seconds [default: the task horizon].
    #[arg(long)]
    pub duration: Option<f64>,

    /// Lookahead in control steps [default: task preset].
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Candidates per plan [default: task preset].
    #[arg(long)]
    pub n_samples: Option<usize>,

    /// Candidate sampling standard deviation in rad [default: task preset].
    #[arg(long)]
    pub noise_sigma: Option<f64>,

    /// MPPI temperature [default: task preset].
    #[arg(long)]
    pub temperature: Option<f64>,

    /// Share of candidates drawn around the current posture [default: task preset].
    #[arg(long)]
    pub instant_fraction: Option<f64>,

    /// Control steps between plans [default: task preset].
    #[arg(long)]
    pub replan_interval: Option<usize>,

    /// Global gain of the muscle force law [default: task preset].
    #[arg(long)]
    pub k_bar: Option<f64>,

    /// Output directory for trajectory.csv, frames/ and score.json.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub frames: FrameArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JudgeArg {
    Oracle,
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthArg {
    Mock,
    Endpoint,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Task id; required unless --config or --resume is given.
    #[arg(long, required_unless_present_any = ["config", "resume"])]
    pub task: Option<String>,

    /// Run directory; must be empty unless --resume is given.
    #[arg(long)]
    pub out: PathBuf,

    /// Continue the run stored in --out.
    #[arg(long, conflicts_with = "config")]
    pub resume: bool,

    /// Run configuration as JSON; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Judge used for comparisons and feedback.
    #[arg(long, value_enum, default_value_t = JudgeArg::Oracle)]
    pub judge: JudgeArg,

    /// Source of new reward programs.
    #[arg(long, value_enum, default_value_t = SynthArg::Mock)]
    pub synth: SynthArg,

    /// Search iterations.
    #[arg(long, default_value_t = 8)]
    pub iters: usize,

    /// Candidate programs per iteration.
    #[arg(long, default_value_t = 4)]
    pub samples: usize,

    /// Seed for the initial state, the planner and the synthesizer.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Starting reward program [default: the task's starting program].
    #[arg(long)]
    pub initial: Option<PathBuf>,

    /// Episode length in seconds [default: the task horizon].
    #[arg(long)]
    pub horizon_s: Option<f64>,

    /// Largest weight a program may carry.
    #[arg(long, default_value_t = 10.0)]
    pub max_weight: f64,

    /// Judge model name [default: $MUSCLELAB_MODEL].
    #[arg(long)]
    pub model: Option<String>,

    /// Synthesizer model name [default: the judge model].
    #[arg(long)]
    pub synth_model: Option<String>,

    /// Use the judge model for synthesis even when --synth-model is set.
    #[arg(long)]
    pub unified_endpoint: bool,

    /// Answer endpoint requests from recorded transcripts (*.jsonl) in this directory.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Run directory containing history.json.
    #[arg(long)]
    pub run: PathBuf,

    /// Where to write heatmap.csv and heatmap.svg [default: the run directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Png,
    Ppm,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub task: TaskArgs,

    /// Trajectory CSV written by simulate, plan or learn.
    #[arg(long)]
    pub trajectory: PathBuf,

    /// Output directory for the frames.
    #[arg(long)]
    pub out: PathBuf,

    /// Image format.
    #[arg(long, value_enum, default_value_t = ImageFormat::Png)]
    pub format: ImageFormat,

    #[command(flatten)]
    pub frames: FrameArgs,
}

#[derive(Debug, Args)]
pub struct TasksArgs {
    /// Print full task specifications as JSON.
    #[arg(long)]
    pub json: bool,
}
