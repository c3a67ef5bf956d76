use std::path::Path;
use std::process::{Command, Output};

fn nnball(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnball"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = nnball(
        &[
            "tail-bound",
            "--seed",
            "3",
            "--n",
            "64,128",
            "--y",
            "-1,0,2",
            "--trials",
            "200",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["exit_code"], 0);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn same_seed_gives_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["gumbel", "--seed", "17", "--n", "64,256", "--trials", "300"];
    nnball(&args, a.path());
    nnball(&args, b.path());
    let read = |d: &Path| std::fs::read(d.join("report.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn failed_check_exits_two() {
    // The intersection-ratio bound from the density ratio does not hold at
    // the corners of the square.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("square.toml");
    std::fs::write(
        &cfg,
        "experiment = \"conditions\"\nmodel = \"square2d\"\n\n[conditions]\nchecks = [\"INT\"]\n",
    )
    .unwrap();
    let out = nnball(
        &["conditions", "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass"], false);
    assert!(!summary["reports"][0]["witnesses"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nnball(&["frobnicate"], dir.path()).status.code(), Some(1));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"gumbel\"\ntrails = 10\n").unwrap();
    let out = nnball(&["gumbel", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}
