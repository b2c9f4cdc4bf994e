use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

const SUBCOMMANDS: [&str; 6] = ["simulate", "plan", "learn", "export-heatmap", "render", "tasks"];

fn musclelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_musclelab"))
        .args(args)
        .env("COLUMNS", "100")
        .env_remove("MUSCLELAB_ENDPOINT_URL")
        .env_remove("MUSCLELAB_MODEL")
        .env_remove("MUSCLELAB_API_KEY")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = musclelab(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    musclelab(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Value after `key: ` on the line that starts with it.
fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
        .to_string()
}

#[test]
fn help_matches_snapshots() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots");
    let update = std::env::var_os("UPDATE_SNAPSHOTS").is_some();
    for sub in [""].into_iter().chain(SUBCOMMANDS) {
        let args: Vec<&str> = [sub, "--help"].into_iter().filter(|a| !a.is_empty()).collect();
        let text = ok(&args);
        let path = dir.join(format!("help_{}.txt", if sub.is_empty() { "main" } else { sub }));
        if update {
            fs::write(&path, &text).unwrap();
        }
        assert_eq!(text, fs::read_to_string(&path).unwrap(), "{}", path.display());
    }
}

/// Option entries of a help page, each joined onto one line.
fn option_entries(help: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in help.lines().map(str::trim).skip_while(|l| *l != "Options:").skip(1) {
        if line.starts_with('-') {
            out.push(line.to_string());
        } else if let Some(last) = out.last_mut() {
            last.push(' ');
            last.push_str(line);
        }
    }
    out
}

#[test]
fn every_valued_option_documents_its_default() {
    let no_default = ["--task <TASK>", "--out <OUT>", "--trajectory <TRAJECTORY>", "--run <RUN>", "--config", "--replay"];
    for sub in SUBCOMMANDS {
        let entries = option_entries(&ok(&[sub, "--help"]));
        assert!(entries.iter().any(|e| e.starts_with("-h, --help")), "{sub}");
        for e in entries.iter().filter(|e| e.contains('<')) {
            if no_default.iter().any(|r| e.trim_start_matches("--").starts_with(r.trim_start_matches("--"))) {
                continue;
            }
            assert!(e.contains("[default"), "{sub}: {e}");
        }
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&["simulate", "--task", "walker_flat", "--bogus"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    let d = tempdir().unwrap();
    let out = d.path().join("o");
    assert_eq!(code(&["simulate", "--task", "walker_moon", "--out", s(&out)]), 1);
    assert_eq!(code(&["simulate", "--task", "walker_flat", "--program", "/no/such.reward", "--out", s(&out)]), 1);
    assert_eq!(code(&["--jobs", "0", "tasks"]), 1);
}

#[test]
fn tasks_lists_all_six() {
    let text = ok(&["tasks"]);
    let ids: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(ids, ["walker_flat", "walker_slope", "walker_rough", "walker_injured", "arm_reach", "arm_reorient"]);
    let json: serde_json::Value = serde_json::from_str(&ok(&["tasks", "--json"])).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 6);
}

#[test]
fn simulate_writes_one_row_per_step() {
    let d = tempdir().unwrap();
    let (a, b, c) = (d.path().join("a"), d.path().join("b"), d.path().join("c"));
    let text = ok(&["simulate", "--task", "walker_flat", "--steps", "150", "--out", s(&a)]);
    assert_eq!(field(&text, "rows"), "150");
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 151);
    assert_eq!(fs::read_dir(a.join("frames")).unwrap().count(), 15);
    ok(&["simulate", "--task", "walker_flat", "--steps", "150", "--out", s(&b)]);
    assert_eq!(csv.as_bytes(), fs::read(b.join("trajectory.csv")).unwrap());
    assert_eq!(fs::read(a.join("frames/frame_0007.png")).unwrap(), fs::read(b.join("frames/frame_0007.png")).unwrap());
    ok(&["simulate", "--task", "walker_flat", "--steps", "150", "--seed", "1", "--out", s(&c)]);
    assert_ne!(csv.as_bytes(), fs::read(c.join("trajectory.csv")).unwrap());
}

#[test]
fn walker_collapses_without_control() {
    let d = tempdir().unwrap();
    let out = d.path().join("sim");
    ok(&["simulate", "--task", "walker_flat", "--steps", "300", "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let y = header.iter().position(|h| *h == "q1").unwrap();
    let first: f64 = csv.lines().nth(1).unwrap().split(',').nth(y).unwrap().parse().unwrap();
    let last: f64 = csv.lines().last().unwrap().split(',').nth(y).unwrap().parse().unwrap();
    assert!(last < first - 0.2, "root height {first} -> {last}");
}

#[test]
fn simulate_program_and_controls_errors() {
    let d = tempdir().unwrap();
    let out = d.path().join("o");
    let bad = d.path().join("bad.reward");
    fs::write(&bad, "term x { wobble } @ 1").unwrap();
    let r = musclelab(&["simulate", "--task", "walker_flat", "--program", s(&bad), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 1, column 10"));
    let u = d.path().join("u.txt");
    fs::write(&u, "0.5 0.5").unwrap();
    assert_eq!(code(&["simulate", "--task", "arm_reach", "--controls", s(&u), "--out", s(&out)]), 1);
    fs::write(&u, "0.5, 0.5, 0.5\n0.5 0.5 0.5\n").unwrap();
    let text = ok(&["simulate", "--task", "arm_reach", "--controls", s(&u), "--steps", "20", "--out", s(&out)]);
    assert_eq!(field(&text, "rows"), "20");
}

#[test]
fn plan_reports_scores() {
    let d = tempdir().unwrap();
    let arm = d.path().join("arm");
    let text = ok(&["plan", "--task", "arm_reach", "--duration", "1", "--out", s(&arm)]);
    let pos: f64 = field(&text, "position error").trim_end_matches(" m").parse().unwrap();
    assert!(pos.is_finite() && pos >= 0.0);
    let score: serde_json::Value = serde_json::from_str(&fs::read_to_string(arm.join("score.json")).unwrap()).unwrap();
    assert_eq!(score["steps"], 100);

    let again = d.path().join("again");
    ok(&["plan", "--task", "arm_reach", "--duration", "1", "--out", s(&again)]);
    assert_eq!(fs::read(arm.join("trajectory.csv")).unwrap(), fs::read(again.join("trajectory.csv")).unwrap());
    assert_eq!(fs::read(arm.join("score.json")).unwrap(), fs::read(again.join("score.json")).unwrap());

    let degenerate = d.path().join("degenerate");
    ok(&["plan", "--task", "arm_reach", "--duration", "0.5", "--n-samples", "1", "--noise-sigma", "0", "--out", s(&degenerate)]);
    assert_eq!(code(&["plan", "--task", "arm_reach", "--n-samples", "0", "--out", s(&degenerate)]), 1);

    let walker = d.path().join("walker");
    let text = ok(&["plan", "--task", "walker_flat", "--duration", "0.5", "--out", s(&walker)]);
    let score: f64 = field(&text, "oracle score").parse().unwrap();
    let dist: f64 = field(&text, "distance").trim_end_matches(" m").parse().unwrap();
    assert_eq!(score, dist);
}

#[test]
fn render_counts_frames() {
    let d = tempdir().unwrap();
    let sim = d.path().join("sim");
    ok(&["simulate", "--task", "walker_flat", "--steps", "100", "--out", s(&sim)]);
    let frames = d.path().join("frames");
    let csv = sim.join("trajectory.csv");
    let text = ok(&["render", "--task", "walker_flat", "--trajectory", s(&csv), "--out", s(&frames), "--format", "ppm"]);
    assert_eq!(field(&text, "frames"), "10");
    assert!(frames.join("frame_0009.ppm").is_file());
    assert_eq!(code(&["render", "--task", "walker_flat", "--trajectory", "/no/such.csv", "--out", s(&frames)]), 1);
    assert_eq!(code(&["render", "--task", "arm_reach", "--trajectory", s(&csv), "--out", s(&frames)]), 2);
}

fn score_column(stdout: &str) -> Vec<f64> {
    stdout.lines().skip(1).filter_map(|l| l.split_whitespace().nth(1)?.parse().ok()).collect()
}

#[test]
fn learn_runs_resumes_and_exports() {
    let d = tempdir().unwrap();
    let run = d.path().join("run");
    let quick = ["--task", "arm_reach", "--horizon-s", "0.1", "--samples", "2", "--seed", "3"];
    let mut args = vec!["learn", "--iters", "1", "--out", s(&run)];
    args.extend(quick);
    ok(&args);
    let iter_dirs: Vec<_> = fs::read_dir(&run)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("iter_"))
        .collect();
    assert_eq!(iter_dirs, ["iter_0000"]);
    assert_eq!(code(&args), 1);

    let long = d.path().join("long");
    let mut args = vec!["learn", "--iters", "3", "--out", s(&long)];
    args.extend(quick);
    let text = ok(&args);
    let scores = score_column(&text);
    assert_eq!(scores.len(), 3);
    assert!(scores.windows(2).all(|w| w[1] >= w[0]), "{scores:?}");
    assert!(text.contains("final program: "));
    let resumed = ok(&["learn", "--resume", "--out", s(&long)]);
    assert_eq!(score_column(&resumed), scores);

    let heat = d.path().join("heat");
    ok(&["export-heatmap", "--run", s(&long), "--out", s(&heat)]);
    let csv = fs::read_to_string(heat.join("heatmap.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "term,stage_0,stage_1,stage_2");
    assert!(heat.join("heatmap.svg").is_file());
    assert_eq!(code(&["export-heatmap", "--run", s(&d.path().join("none"))]), 1);
    assert_eq!(code(&["learn", "--resume", "--out", s(&d.path().join("none"))]), 1);
}

#[test]
fn learn_from_a_config_file() {
    let d = tempdir().unwrap();
    let cfg = d.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"task_id":"arm_reorient","iterations":2,"samples_per_iter":2,"seeds":{"sim":1,"planner":2,"synthesis":3},
            "judge":"oracle","synthesis":"mock","horizon_s":0.1,"max_weight":10.0}"#,
    )
    .unwrap();
    let run = d.path().join("run");
    let text = ok(&["learn", "--config", s(&cfg), "--iters", "1", "--out", s(&run)]);
    assert_eq!(score_column(&text).len(), 1);
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["task_id"], "arm_reorient");
    assert_eq!(saved["iterations"], 1);
    assert_eq!(saved["seeds"]["planner"], 2);
    fs::write(&cfg, "{").unwrap();
    assert_eq!(code(&["learn", "--config", s(&cfg), "--out", s(&d.path().join("x"))]), 1);
}

#[test]
fn endpoint_failures_exit_with_three() {
    let d = tempdir().unwrap();
    let base = ["--task", "arm_reach", "--horizon-s", "0.1", "--samples", "2", "--iters", "2"];
    let mut args = vec!["learn", "--judge", "endpoint", "--out"];
    let a = d.path().join("a");
    args.push(s(&a));
    args.extend(base);
    assert_eq!(code(&args), 3);

    let empty = d.path().join("transcripts");
    fs::create_dir(&empty).unwrap();
    let b = d.path().join("b");
    let mut args = vec!["learn", "--judge", "endpoint", "--model", "m", "--replay", s(&empty), "--out", s(&b)];
    args.extend(base);
    assert_eq!(code(&args), 3);
}
