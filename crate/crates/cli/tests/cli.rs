use std::path::Path;
use std::process::{Command, Output};

fn encircle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_encircle")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = encircle(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_eval_replay() {
    let dir = tempfile::tempdir().unwrap();
    let train_cfg = dir.path().join("train.toml");
    std::fs::write(
        &train_cfg,
        "total_steps = 300\nlearning_starts = 100\nbatch_size = 4\ntrain_every = 10\nepisode_cap = 100\n\
         [curriculum]\nstages = [{ start_step = 0, end_step = 300, pursuers = 3, evaders = 1, obstacles = 0, vortices = 2 }]\n\
         [policy]\nlatent_dim = 8\nheads = 2\nquantile_embedding = 8\n",
    )
    .unwrap();
    let run_dir = dir.path().join("run");
    let text = ok(&["train", "--config", s(&train_cfg), "--variant", "mean", "--seed", "3", "--out", s(&run_dir)]);
    assert!(text.contains("trained mean_embedding for 300 steps"), "{text}");
    let ckpt = run_dir.join("step_300.ckpt");
    assert!(ckpt.exists() && run_dir.join("step_0.ckpt").exists() && run_dir.join("log.csv").exists());

    let catalog = dir.path().join("catalog.toml");
    std::fs::write(
        &catalog,
        "[[scenario]]\nname = \"tiny\"\npursuers = 3\nevaders = 1\nobstacles = 1\nvortices = 1\nepisode_cap = 30\n",
    )
    .unwrap();
    let results = dir.path().join("results.jsonl");
    let traj = dir.path().join("traj");
    let eval_args = [
        "eval", "--checkpoint", s(&ckpt), "--variant", "mean", "--config", s(&catalog), "--scenario", "tiny",
        "--episodes", "2", "--seed", "5", "--out", s(&results), "--format", "jsonl", "--trajectories", s(&traj),
    ];
    let text = ok(&eval_args);
    assert!(text.starts_with("tiny [mean_embedding] trials=2"), "{text}");
    assert_eq!(std::fs::read_to_string(&results).unwrap().lines().count(), 2);
    let dump = traj.join("tiny_5.jsonl");
    assert!(traj.join("tiny_6.jsonl").exists());

    let summary = ok(&["replay", "--trajectories", s(&dump)]);
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("t,active_pursuers,collided_pursuers,active_evaders,encircled_evaders"));
    assert_eq!(lines.next(), Some("0,3,0,1,0"));

    // same inputs, same bytes
    let first = std::fs::read(&results).unwrap();
    ok(&eval_args);
    assert_eq!(std::fs::read(&results).unwrap(), first);

    let wrong = encircle(&["eval", "--checkpoint", s(&ckpt), "--variant", "terl", "--scenario", "CC", "--episodes", "1"]);
    assert!(!wrong.status.success());
}

#[test]
fn random_baseline_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let catalog = dir.path().join("catalog.toml");
    std::fs::write(&catalog, "[[scenario]]\nname = \"CC\"\npursuers = 3\nevaders = 1\nobstacles = 0\nvortices = 0\nepisode_cap = 20\n").unwrap();
    let text = ok(&["eval", "--config", s(&catalog), "--scenario", "CC", "--episodes", "3", "--out", s(&csv)]);
    assert!(text.starts_with("CC [random] trials=3"), "{text}");
    let body = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().next(), Some("scenario,variant,seed,outcome,travel_time_s,collided,pursuers"));
    assert_eq!(body.lines().count(), 4);

    assert!(!encircle(&["eval", "--scenario", "nowhere"]).status.success());
    assert!(!encircle(&["eval", "--variant", "bogus"]).status.success());
    assert!(!encircle(&["eval", "--format", "xml"]).status.success());
}
