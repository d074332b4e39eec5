//! Command-line contract: exit codes, log format, state parsing, overrides.

use std::process::{Command, Output};

const CTEL: &str = env!("CARGO_BIN_EXE_ctel");

fn ctel(args: &[&str]) -> Output {
    Command::new(CTEL)
        .args(args)
        .env_remove("CTEL_SEED")
        .env_remove("CTEL_JOBS")
        .env_remove("CTEL_ALICE")
        .env_remove("CTEL_BOB")
        .env_remove("CTEL_CHARLIE")
        .env_remove("CTEL_LISTEN")
        .output()
        .expect("run ctel")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn classical_log_has_the_fixed_fields() {
    let o = ctel(&["run", "classical", "--x", "0.3", "--trials", "50", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<serde_json::Value> =
        stdout(&o).lines().map(|l| serde_json::from_str(l).expect("one JSON object per line")).collect();
    assert_eq!(lines.len(), 50);
    for (i, v) in lines.iter().enumerate() {
        assert_eq!(v["trial_index"], i);
        assert_eq!(v["x"], 0.3);
        assert_eq!(v["bits_sent"], 1);
        for field in ["truth_charlie_face", "outcome", "correction", "truth_bob_face", "event_order"] {
            assert!(!v[field].is_null(), "missing {field} in {v}");
        }
        assert_eq!(v["truth_charlie_face"], v["truth_bob_face"]);
    }
    let summary = stderr(&o);
    for needle in ["bob heads frequency", "confidence interval", "invariant violations: 0", "bits/trial: 1"] {
        assert!(summary.contains(needle), "summary lacks {needle:?}:\n{summary}");
    }
}

#[test]
fn x_of_one_always_ends_heads() {
    let o = ctel(&["run", "classical", "--x", "1", "--trials", "100", "--no-log"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("bob heads frequency: 1.000000"), "{}", stdout(&o));
}

#[test]
fn quantum_run_reports_exact_fidelity() {
    let o = ctel(&["run", "quantum", "--state", "random", "--trials", "1000", "--seed", "7", "--no-log"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let min_fidelity: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("min fidelity: "))
        .expect("min fidelity line")
        .parse()
        .unwrap();
    assert!(min_fidelity >= 1.0 - 1e-12);
    assert!(s.contains("bits/trial: 2"));
}

#[test]
fn quantum_state_normalization_rules() {
    // Norm off by about 5e-9: accepted with a warning.
    let o = ctel(&["run", "quantum", "--state", "0.6,0,0.8,1e-4", "--trials", "3", "--no-log"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    // Exactly normalized: no warning.
    let o = ctel(&["run", "quantum", "--state", "0.6,0,0.8,0", "--trials", "3", "--no-log"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stderr(&o).contains("warning"));
    // Off by 0.5%: usage error.
    let o = ctel(&["run", "quantum", "--state", "1,0,0,0.1", "--trials", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ctel(&["run", "quantum", "--state", "-0.6,0,0.8,0", "--trials", "1", "--no-log"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["verify", "--suite", "everything"][..],
        &["run", "classical", "--x", "1.5"],
        &["run", "classical", "--x", "0.5", "--trials", "0"],
        &["run", "quantum", "--state", "1,0"],
        &["serve", "--role", "eve"],
        &["frobnicate"],
    ] {
        assert_eq!(ctel(args).status.code(), Some(2), "{args:?}");
    }
    assert_eq!(ctel(&["--help"]).status.code(), Some(0));
}

#[test]
fn seed_comes_from_the_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(CTEL);
        cmd.args(["run", "classical", "--x", "0.5", "--trials", "20"]);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        cmd.env_remove("CTEL_SEED");
        if let Some(e) = env {
            cmd.env("CTEL_SEED", e);
        }
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("9"), None), run(None, Some("9")));
    assert_ne!(run(Some("9"), None), run(Some("10"), None));
}

#[test]
fn log_file_matches_stdout_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ndjson");
    let to_file = ctel(&["run", "classical", "--x", "0.25", "--trials", "30", "--log", path.to_str().unwrap()]);
    let to_stdout = ctel(&["run", "classical", "--x", "0.25", "--trials", "30"]);
    assert_eq!(std::fs::read(&path).unwrap(), to_stdout.stdout);
    assert!(stdout(&to_file).contains("bits/trial: 1"));
}

#[test]
fn tcp_run_without_servers_fails_cleanly() {
    let o = ctel(&[
        "run", "classical", "--x", "0.5", "--trials", "1", "--transport", "tcp", "--alice", "127.0.0.1:1", "--bob",
        "127.0.0.1:2", "--charlie", "127.0.0.1:3",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("connecting"), "{}", stderr(&o));
}

#[test]
fn verify_writes_both_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctel(&["verify", "--suite", "transport", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["suite"], "transport");
    assert_eq!(json["pass"], true);
    assert!(json["correctness"].is_null());
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.starts_with("# Verification report"));
}

#[test]
fn verify_rejects_too_few_trials() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctel(&["verify", "--suite", "correctness", "--trials", "10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
