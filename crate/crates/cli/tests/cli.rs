use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sparsedom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsedom"))
        .args(args)
        .env_remove("SPARSEDOM_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn haar_single_mode_csv() {
    let out = sparsedom(&[
        "--depth",
        "3",
        "haar",
        "--signal",
        "single_mode:1,1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "depth,index,coefficient");
    assert_eq!(lines.len(), 1 + 7);
    // h̃ on [1/2, 1) is 2^{-1/2} h.
    let nonzero: Vec<&str> = lines[1..]
        .iter()
        .filter(|l| !l.ends_with(",0"))
        .copied()
        .collect();
    assert_eq!(nonzero.len(), 1);
    let value: f64 = nonzero[0].strip_prefix("1,1,").unwrap().parse().unwrap();
    assert!((value - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn dominate_modes_certify() {
    for mode in ["avg", "square", "weighted", "osc"] {
        let out = sparsedom(&[
            "--depth", "7", "--seed", "3", "--p", "1", "dominate", "--mode", mode,
        ]);
        assert!(
            out.status.success(),
            "{mode}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v = json(&out);
        assert_eq!(v["passed"], true);
        assert_eq!(v["certificate"]["mode"], mode);
    }
}

#[test]
fn atoms_cz_weak11_lerner_pass() {
    for cmd in ["atoms", "cz", "weak11", "lerner"] {
        let out = sparsedom(&["--depth", "8", cmd]);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(json(&out)["passed"], true, "{cmd}");
    }
}

#[test]
fn seed_env_fallback_matches_flag() {
    let flag = sparsedom(&["--depth", "5", "--seed", "42", "haar"]);
    let env = Command::new(env!("CARGO_BIN_EXE_sparsedom"))
        .args(["--depth", "5", "haar"])
        .env("SPARSEDOM_SEED", "42")
        .output()
        .unwrap();
    let other = sparsedom(&["--depth", "5", "--seed", "43", "haar"]);
    assert_eq!(flag.stdout, env.stdout);
    assert_ne!(flag.stdout, other.stdout);
}

#[test]
fn sparse_check_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    fs::write(&good, "depth,index\n0,0\n1,0\n").unwrap();
    let out = sparsedom(&["sparse-check", good.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(json(&out)["certified"], true);

    let full = dir.path().join("full.csv");
    fs::write(&full, "depth,index\n0,0\n1,0\n1,1\n").unwrap();
    let out = sparsedom(&["sparse-check", full.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["carleson"]["carleson"], 2.0);
}

#[test]
fn bad_input_exits_with_two() {
    let out = sparsedom(&["haar", "--input", "/definitely/missing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("campaign.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn campaign_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "depth_J = 6\ntrials = 4\nseed = 9\nmodes = [\"avg\", \"atoms\", \"cz\", \"weak11\"]\n",
    );
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = sparsedom(&[
            "campaign",
            "--config",
            &config,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let files: Vec<Vec<u8>> = ["trials.jsonl", "summary.json", "summary.csv", "series.csv"]
            .iter()
            .map(|f| fs::read(out_dir.join(f)).unwrap())
            .collect();
        reports.push(files);
    }
    assert_eq!(reports[0], reports[1]);
    let trials = String::from_utf8(reports[0][0].clone()).unwrap();
    assert_eq!(trials.lines().count(), 16);
}

#[test]
fn campaign_single_mode_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "depth_J = 5\ntrials = 1\nmodes = [\"atoms\"]\nsignal = \"single_mode:1,0\"\n",
    );
    let out_dir = dir.path().join("out");
    let out = sparsedom(&[
        "campaign",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = json(&out);
    assert_eq!(summary["hard_failures"], 0);
    assert_eq!(summary["modes"][0]["max_constant"], 1.0);
    let trial: Value = serde_json::from_str(
        fs::read_to_string(out_dir.join("trials.jsonl"))
            .unwrap()
            .trim(),
    )
    .unwrap();
    assert_eq!(trial["metrics"]["c_Q"], 0.5);
}

#[test]
fn campaign_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "trials = 0\nmodes = [\"avg\"]\n");
    let out = sparsedom(&["campaign", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}
