use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decpomdp"))
}

fn problems() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

#[test]
fn solve_dectiger_h3_prints_published_value() {
    let out = bin()
        .args(["solve", "--horizon", "3", "--algorithm", "ice", "--heuristic", "qbg"])
        .arg("--problem")
        .arg(problems().join("dectiger.dpomdp"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value: f64 = stdout
        .trim()
        .strip_prefix("V* = ")
        .expect("stdout format")
        .parse()
        .unwrap();
    assert!((value - 5.190812).abs() < 1e-5, "stdout: {stdout}");
}

#[test]
fn horizon_zero_is_a_usage_error() {
    let out = bin()
        .args(["solve", "--horizon", "0", "--random", "2,2,2,2,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unparseable_problem_file_is_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.dpomdp");
    std::fs::write(&path, "agents: 2\nthis is not a declaration\n").unwrap();
    let out = bin()
        .args(["solve", "--horizon", "2"])
        .arg("--problem")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn node_cap_overrun_is_exit_3() {
    let out = bin()
        .args([
            "solve",
            "--horizon",
            "3",
            "--algorithm",
            "gmaa",
            "--heuristic",
            "qmdp",
            "--node-cap",
            "4",
        ])
        .arg("--problem")
        .arg(problems().join("dectiger.dpomdp"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stats_are_deterministic_apart_from_wallclock() {
    let dir = tempfile::tempdir().unwrap();
    let mut jsons = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = bin()
            .args(["solve", "--horizon", "3", "--algorithm", "ice", "--heuristic", "qbg"])
            .arg("--problem")
            .arg(problems().join("dectiger.dpomdp"))
            .arg("--stats")
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success());
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        v["heuristic_time_s"] = 0.0.into();
        v["stats"]["wallclock_s"] = 0.0.into();
        jsons.push(v);
    }
    assert_eq!(jsons[0], jsons[1]);
}

#[test]
fn policy_artifact_reevaluates_to_reported_value() {
    let dir = tempfile::tempdir().unwrap();
    let policy_path = dir.path().join("pi.csv");
    let out = bin()
        .args(["solve", "--horizon", "2", "--algorithm", "ic", "--heuristic", "qpomdp"])
        .arg("--problem")
        .arg(problems().join("broadcastchannel.dpomdp"))
        .arg("--policy")
        .arg(&policy_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("V* = 2.000000"), "stdout: {stdout}");
    let csv = std::fs::read_to_string(&policy_path).unwrap();
    assert!(csv.starts_with("agent,stage,obs_history,action"));
    // one row per agent per stage-history: 2 agents x (1 + 2) histories
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn sweep_emits_one_row_per_algorithm_and_horizon() {
    let out = bin()
        .args(["sweep", "--horizon", "2", "--sweep", "2..3", "--algorithms", "ic,ice", "--heuristic", "qbg"])
        .arg("--problem")
        .arg(problems().join("broadcastchannel.dpomdp"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1 + 4, "{stdout}");
    assert!(lines[1].starts_with("ic,2,2.000000"));
    assert!(lines[2].starts_with("ic,3,2.990000"));
    assert!(lines[4].starts_with("ice,3,2.990000"));
}

#[test]
fn sweep_with_empty_algorithm_list_is_header_only() {
    let out = bin()
        .args(["sweep", "--horizon", "2", "--sweep", "2..2", "--algorithms", ""])
        .arg("--problem")
        .arg(problems().join("dectiger.dpomdp"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("algorithm,horizon,v_star"));
}

#[test]
fn verify_small_campaign_agrees() {
    let out = bin()
        .args(["verify", "--horizon", "2", "--seeds", "5", "--sizes", "2,2,2,2", "--heuristic", "qmdp"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("5/5 agree"), "stdout: {stdout}");
}

#[test]
fn verify_replay_reports_single_seed() {
    let out = bin()
        .args([
            "verify",
            "--horizon",
            "2",
            "--seeds",
            "5",
            "--sizes",
            "2,2,2,2",
            "--heuristic",
            "qmdp",
            "--replay-seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("seed 3"), "stdout: {stdout}");
    assert!(stdout.contains("1/1 agree"));
}
