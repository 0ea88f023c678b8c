use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn semcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semcov"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
num_uavs = 2
num_bs = 1
num_channels = 1
steps_per_episode = 4
history = 2
image = "synthetic:gradient"

[training]
batch_size = 4
memory_capacity = 40
target_sync = 5
recurrent_units = 4
dense_widths = [6]
train_episodes = 3
test_episodes = 2

[sweep]
variable = "channels"
values = [1, 2]
seeds = [0, 1]
methods = ["SAMA", "HU"]
"#;

#[test]
fn missing_config_exits_one_and_names_the_path() {
    let out = semcov(&["train", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/exp.toml"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(semcov(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(semcov(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(semcov(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "num_drones = 3\n");
    let out = semcov(&[
        "oracle",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_drones"));
}

#[test]
fn sweep_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, workers) in [(&a, "1"), (&b, "2")] {
        let o = semcov(&[
            "sweep",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let x = fs::read(a.join("results.csv")).unwrap();
    let y = fs::read(b.join("results.csv")).unwrap();
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(
        text.starts_with("method,sweep_var,sweep_value,seed,image,objective_mean,objective_std\n")
    );
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn train_then_eval_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().to_str().unwrap();
    let t = semcov(&["train", "--config", &cfg, "--out", out, "--seed", "3"]);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3 + 2);
    assert!(dir.path().join("checkpoint/manifest.json").exists());

    let e = semcov(&[
        "eval",
        "--config",
        &cfg,
        "--out",
        out,
        "--seed",
        "3",
        "--episodes",
        "1",
    ]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4);

    // A different seed builds a different scenario, which the checkpoint rejects.
    let bad = semcov(&["eval", "--config", &cfg, "--out", out, "--seed", "4"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn oracle_quality_table_and_gradcheck() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().to_str().unwrap();
    let o = semcov(&["oracle", "--config", &cfg, "--out", out]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "slot,action_0,action_1,reward");
    assert_eq!(csv.lines().count(), 1 + 4);

    let q = semcov(&["quality-table", "--config", &cfg, "--metric", "ssim"]);
    assert!(q.status.success());
    assert!(String::from_utf8_lossy(&q.stdout).contains("ssim"));

    let g = semcov(&["gradcheck", "--cases", "14"]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stdout));
}

#[test]
fn quick_accept_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let a = semcov(&["accept", "--quick", "--out", out]);
    // Learning checks are skipped, so the report cannot pass as a whole.
    assert_eq!(a.status.code(), Some(1));
    let text = fs::read_to_string(dir.path().join("acceptance.txt")).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("[PASS]")).count(),
        7,
        "{text}"
    );
}
