use std::path::Path;
use std::process::{Command, Output};

fn stochq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochq"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_tabular_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = stochq(&[
        "run-tabular",
        "--variant",
        "stoch-q-learning",
        "--seed",
        "9",
        "--steps",
        "300",
        "--k",
        "1",
        "--memory",
        "none",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("stoch-q-learning_seed9.csv")).unwrap();
    assert_eq!(text.lines().count(), 301);
    // k = 1 without memory: every candidate set has one action
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")));
    assert!(out.join("stoch-q-learning_summary.json").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"steps": 10, "gama": 0.9}"#);
    assert_eq!(
        stochq(&["run-tabular", "--config", &bad]).status.code(),
        Some(2)
    );
    assert_eq!(
        stochq(&["run-tabular", "--variant", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(
        stochq(&["run-tabular", "--variant", "dqn"]).status.code(),
        Some(2)
    );
    assert_eq!(
        stochq(&["run-tabular", "--memory", "global"]).status.code(),
        Some(2)
    );
    assert_eq!(
        stochq(&["run-tabular", "--config", "/no/such/file.json"])
            .status
            .code(),
        Some(1)
    );
    let pole = write(
        dir.path(),
        "pole.json",
        r#"{"env": {"kind": "cart-pole", "granularity": 1}, "variant": "dqn", "steps": 5}"#,
    );
    assert_eq!(
        stochq(&["run-deep", "--config", &pole]).status.code(),
        Some(2)
    );
    assert_eq!(
        stochq(&["bench-stochmax", "--repetitions", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        stochq(&["analyze", "lemma1", "--n", "8", "--k", "9"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn analysis_verdicts_set_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = stochq(&["analyze", "contraction", "--trials", "200", "--out", out]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("analysis_contraction.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["passed"], true);
    // far too few steps to approach the fixed point
    let o = stochq(&[
        "analyze",
        "qstar-convergence",
        "--steps",
        "50",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(dir.path().join("analysis_qstar-convergence.json").exists());
}

#[test]
fn summarize_rejects_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "x_seed0.csv", "step,reward\n0,1\n");
    let o = stochq(&["summarize", &bad, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed"));
}

#[test]
fn run_deep_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "deep.json",
        &format!(
            r#"{{"env": {{"kind": "cart-pole", "granularity": 32}}, "variant": "stoch-ddqn", "seeds": [0, 1],
               "steps": 200, "out_dir": "{}", "checkpoint_interval": 100}}"#,
            dir.path().join("d").display()
        ),
    );
    let o = stochq(&["run-deep", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for seed in [0, 1] {
        assert!(dir
            .path()
            .join(format!("d/stoch-ddqn_seed{seed}.csv"))
            .exists());
        assert!(dir
            .path()
            .join(format!("d/stoch-ddqn_seed{seed}_step100.ckpt.json"))
            .exists());
        assert!(dir
            .path()
            .join(format!("d/stoch-ddqn_seed{seed}.ckpt.json"))
            .exists());
    }
}
