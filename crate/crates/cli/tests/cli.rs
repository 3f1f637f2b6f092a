use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn flood(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flood")).args(args).output().expect("binary runs")
}

fn flood_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_flood"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn scenario(name: &str) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    root.join(name).to_string_lossy().into_owned()
}

fn last_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().last().expect("some output")).unwrap()
}

#[test]
fn run_even_cycle() {
    let out = flood(&["run", &scenario("c6.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = last_json(&out);
    assert_eq!(v["verdict"], "terminated");
    assert_eq!(v["lastRound"], 3);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn run_triangle_adversary() {
    let out = flood(&["run", &scenario("triangle-adversary.json")]);
    assert_eq!(out.status.code(), Some(20));
    let v = last_json(&out);
    assert_eq!(v["verdict"], "non-terminating");
    assert_eq!(v["period"], 4);
}

#[test]
fn tight_budget_exhausts() {
    let out = flood(&["run", &scenario("c6.json"), "--budget", "2"]);
    assert_eq!(out.status.code(), Some(30));
    assert_eq!(last_json(&out)["verdict"], "budget-exhausted");
}

#[test]
fn malformed_scenarios_exit_one_with_a_field_path() {
    let out = flood_stdin(&["run", "-"], r#"{"graph":{"edgeList":"a b"},"initiations":[{"node":"z","message":"M","round":0}]}"#);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("initiations[0].node"), "{err}");

    let out = flood_stdin(&["run", "-"], "not json");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ranked_order_violation_is_an_input_error() {
    let text = r#"{"graph":{"edgeList":"a b\nb c"},"variant":"ranked",
        "initiations":[{"node":"a","message":"lo","round":2},{"node":"c","message":"hi","round":0}]}"#;
    let out = flood_stdin(&["verify", "-"], text);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("rank order"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = flood(&["run", &scenario("triangle-adversary.json")]);
    let b = flood(&["run", &scenario("triangle-adversary.json")]);
    assert_eq!(a.stdout, b.stdout);
    let a = flood(&["verify", &scenario("ranked-stream.json")]);
    let b = flood(&["verify", &scenario("ranked-stream.json")]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    let out = flood(&["run", &scenario("c6.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 5);
}

#[test]
fn analyze_reports() {
    let dir = tempfile::tempdir().unwrap();
    let c5 = dir.path().join("c5.txt");
    std::fs::write(&c5, "a b\nb c\nc d\nd e\ne a\n").unwrap();
    let out = flood(&["analyze", c5.to_str().unwrap(), "--source", "a"]);
    let v = last_json(&out);
    assert_eq!((v["e"].as_u64(), v["d"].as_u64()), (Some(2), Some(2)));
    assert_eq!(v["bipartite"], false);
    assert_eq!(v["ecBipartite"], false);

    let out = flood(&["analyze", &scenario("c4.txt"), "--sources", "a,b"]);
    let v = last_json(&out);
    assert_eq!(v["bipartite"], true);
    assert_eq!(v["ecBipartite"], false);

    let out = flood_stdin(&["analyze", "-", "--source", "x"], "x y\ny z\n");
    let v = last_json(&out);
    assert_eq!((v["e"].as_u64(), v["d"].as_u64()), (Some(2), Some(2)));
    assert_eq!(v["ecBipartite"], true);
}

#[test]
fn analyze_disconnected_graph_warns() {
    let out = flood_stdin(&["analyze", "-", "--source", "a"], "a b\nc d\n");
    assert_eq!(out.status.code(), Some(0));
    let v = last_json(&out);
    assert!(v["e"].is_null() && v["d"].is_null());
    assert!(v["warning"].is_string());
    assert!(String::from_utf8(out.stderr).unwrap().contains("warning"));
}

#[test]
fn verify_passes_on_basic_and_skips_unranked() {
    let out = flood(&["verify", &scenario("c6.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = last_json(&out);
    assert_eq!(v["passed"], true);

    let unranked = r#"{"graph":{"edgeList":"0 1\n0 2\n1 2"},"variant":"unranked",
        "initiations":[{"node":"0","message":"M0","round":0},{"node":"0","message":"M1","round":1}],
        "selector":{"perNode":{"1":"highest"}}}"#;
    let out = flood_stdin(&["verify", "-"], unranked);
    assert_eq!(out.status.code(), Some(0));
    let v = last_json(&out);
    assert_eq!(v["verdict"]["verdict"], "non-terminating");
    let receipt = v["checks"].as_array().unwrap().iter().find(|c| c["check"] == "receipt-bound").unwrap();
    assert_eq!(receipt["status"], "not-applicable");
}

fn witness_round_trip(family: &str, extra: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["search", family, "--out", dir.path().to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = flood(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = last_json(&out);
    assert_eq!(report["found"], true);
    assert_eq!(report["reverified"], true);

    let file = PathBuf::from(report["file"].as_str().unwrap());
    let rerun = flood(&["run", file.to_str().unwrap()]);
    assert_eq!(rerun.status.code(), Some(20));
    let verdict = last_json(&rerun);
    assert_eq!(verdict["cycleStart"], report["cycleStart"]);
    assert_eq!(verdict["period"], report["period"]);
    assert_eq!(verdict["certificate"], report["certificate"]);
}

#[test]
fn witnesses_round_trip_through_run() {
    witness_round_trip("edge-addition", &["--max-nodes", "4"]);
    witness_round_trip("unranked", &["--max-nodes", "4"]);
    witness_round_trip("fixed-delay", &["--max-nodes", "5"]);
}

#[test]
fn search_not_found_is_explicit() {
    let out = flood(&["search", "fixed-delay", "--max-nodes", "3", "--max-candidates", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let v = last_json(&out);
    assert_eq!(v["found"], false);
    assert_eq!(v["examined"], 5);
}

#[test]
fn search_counts_sweeps_and_sharp() {
    let v = last_json(&flood(&["search", "count", "--max-nodes", "4"]));
    assert_eq!(v["connectedGraphs"], 38);

    let out = flood(&["search", "sweep", "--max-nodes", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(last_json(&out)["violations"].as_array().unwrap().len(), 0);

    let dir = tempfile::tempdir().unwrap();
    let out = flood(&["search", "sharp", "--max-nodes", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let found = last_json(&out);
    let kinds: Vec<&str> = found.as_array().unwrap().iter().map(|s| s["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"upper") && kinds.contains(&"lower"));
    for s in found.as_array().unwrap() {
        let rerun = flood(&["run", s["file"].as_str().unwrap()]);
        assert_eq!(last_json(&rerun)["lastRound"], s["lastRound"]);
    }
}

#[test]
fn random_bounds_are_seeded() {
    let a = flood(&["search", "random-bounds", "--cases", "50", "--seed", "3", "--max-nodes", "8"]);
    let b = flood(&["search", "random-bounds", "--cases", "50", "--seed", "3", "--max-nodes", "8"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
