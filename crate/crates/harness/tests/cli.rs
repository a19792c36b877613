use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lor(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lor")).current_dir(dir).args(args).output().expect("binary runs")
}

const SMALL: &str = "N = 150\nkappa = 7\nseed = 2\nfractal_min = 2\nfractal_max = 6\ncheckpoints = 4\n\
                     [adversary]\nwithhold_service_prob = 0.3\nvt_misvote_prob = 0.5\n";

#[test]
fn run_writes_the_three_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = lor(dir.path(), &["--config", "c.toml", "--out-dir", "o", "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for ext in ["events", "metrics.csv", "summary"] {
        let path = dir.path().join(format!("o/lor-n150-k7-l3-s2.{ext}"));
        assert!(path.exists(), "{}", path.display());
    }
    let csv = fs::read_to_string(dir.path().join("o/lor-n150-k7-l3-s2.metrics.csv")).unwrap();
    assert!(csv.starts_with("run_id,checkpoint,metric,value\n"));
}

#[test]
fn replays_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    for out in ["a", "b"] {
        let o = lor(dir.path(), &["--config", "c.toml", "--out-dir", out, "--trials", "2", "run"]);
        assert_eq!(o.status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for name in names {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "N = 100\nkappa = 10\n").unwrap();
    let out = lor(dir.path(), &["--config", "bad.toml", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));

    fs::write(dir.path().join("broken.toml"), "N = 100\nseed = = 1\n").unwrap();
    let out = lor(dir.path(), &["--config", "broken.toml", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(lor(dir.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(lor(dir.path(), &["compare", "--criterion", "42"]).status.code(), Some(1));
    assert_eq!(lor(dir.path(), &["attack", "--scenario", "nope"]).status.code(), Some(1));
}

#[test]
fn theory_and_attack_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = lor(dir.path(), &["--config", "c.toml", "theory"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("exact_wrong_vote_prob,"));
    assert!(text.contains("worst_case_degree,"));

    let out = lor(dir.path(), &["--config", "c.toml", "--out-dir", "o", "attack", "--scenario", "sybil_flood"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["scenario"], "sybil_flood");
}

#[test]
fn a_single_criterion_runs_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = lor(dir.path(), &["compare", "--criterion", "exact_vs_oracle"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}
