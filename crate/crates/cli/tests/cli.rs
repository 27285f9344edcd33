use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn rademacher(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rademacher"))
        .args(args)
        .env_remove("RADEMACHER_THREADS")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

#[test]
fn prob_reports_seven_eighths() {
    let out = rademacher(&["prob"], "1/2,1/2,1/2,1/2\n");
    assert_eq!(out.status.code(), Some(0));
    let report = json_of(&out);
    assert_eq!(report["results"][0]["probability"], "7/8");
    assert_eq!(report["results"][0]["line"], 1);
    assert_eq!(report["config"]["command"], "prob");
    assert_eq!(report["config"]["threshold"], "1");
}

#[test]
fn strict_prob_reports_three_eighths() {
    let out = rademacher(&["prob", "--strict"], "1/2,1/2,1/2,1/2\n");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["results"][0]["probability"], "3/8");
}

#[test]
fn reads_instances_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.txt");
    std::fs::write(
        &path,
        "# two instances\n3/5, 4/5\n\n0.5,0.5,0.5,0.5 # tight\n",
    )
    .unwrap();
    let out = rademacher(
        &["prob", "--input", path.to_str().unwrap(), "--output", "csv"],
        "",
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        csv,
        "line,n,count,probability,value\n2,2,2,1/2,0.5\n4,4,14,7/8,0.875\n"
    );
}

#[test]
fn parse_errors_exit_2_with_line_number() {
    let out = rademacher(&["prob"], "1/2,1/2\n1/2,x\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_config_exits_2() {
    assert_eq!(
        rademacher(&["prob", "--threshold", "-1"], "1\n")
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        rademacher(&["moments", "--p", "1.5"], "1\n").status.code(),
        Some(2)
    );
    assert_eq!(rademacher(&["certify"], "1,1\n").status.code(), Some(2));
    assert_eq!(
        rademacher(&["search", "--method", "grid", "--n", "10"], "")
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn float_mode_n2_family() {
    let out = rademacher(
        &["prob", "--mode", "float"],
        "0.7071067811865476,0.7071067811865476\n",
    );
    let report = json_of(&out);
    assert_eq!(report["results"][0]["value"], 0.5);
    assert_eq!(report["config"]["mode"], "float");
}

#[test]
fn dist_csv_has_the_documented_header() {
    let out = rademacher(&["dist", "--output", "csv"], "1/2,1/2\n");
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv, "value,count,probability\n-1,1,1/4\n0,2,1/2\n1,1,1/4\n");
}

#[test]
fn certify_reports_bound_below_exact() {
    let out = rademacher(&["certify", "--diagnostic"], "2/5,2/5,3/10,3/10,2/5,2/5\n");
    assert_eq!(out.status.code(), Some(0));
    let cert = &json_of(&out)["results"][0]["certificate"];
    assert_eq!(cert["K"], 2);
    assert_eq!(cert["certified"], "257/625");
    assert_eq!(cert["sound"], true);
    assert!(cert["diagnostic"].is_string());
}

#[test]
fn stopping_profile_json() {
    let out = rademacher(&["stopping"], "1/5,3/10,2/5,1/2,2/5,3/10,3/10\n");
    assert_eq!(out.status.code(), Some(0));
    let profile = &json_of(&out)["results"][0]["profile"];
    assert_eq!(profile["K"], 3);
    assert_eq!(profile["t_distribution"]["3"], "1/4");
}

#[test]
fn moments_report_khintchine_constant() {
    let out = rademacher(&["moments", "--p", "4"], "1/2,1/2,1/2,1/2\n");
    let m = &json_of(&out)["results"][0]["moments"];
    assert_eq!(m["fourth_moment"], "5/2");
    assert_eq!(m["khintchine_B"], 3.0);
}

#[test]
fn verify_theorem_passes() {
    let out = rademacher(&["verify-theorem", "--samples", "300"], "");
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report = json_of(&out);
    assert_eq!(report["passed"], true);
    let names: Vec<_> = report["steps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "khintchine constants",
            "polynomial identities",
            "global theorem",
            "improved constant",
            "soundness sweep"
        ]
    );
}

#[test]
fn verify_theorem_fails_with_a_weak_exponent() {
    // At p = 3 the refined constant falls short of 13/32 + 9e-6.
    let out = rademacher(&["verify-theorem", "--samples", "10", "--p", "3"], "");
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["passed"], false);
}

#[test]
fn search_is_reproducible_and_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let args = [
        "search",
        "--n",
        "4",
        "--restarts",
        "3",
        "--seed",
        "9",
        "--trace",
        trace.to_str().unwrap(),
    ];
    let a = json_of(&rademacher(&args, ""));
    let b = json_of(&rademacher(&args, ""));
    assert_eq!(a["result"], b["result"]);
    assert_eq!(a["result"]["method"], "pattern");
    assert_eq!(a["result"]["seed"], 9);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("evaluation,prob\n0,"));
}

#[test]
fn rational_output_is_independent_of_thread_count() {
    let input = "1/7,2/7,3/7,1/3,1/5,2/9,1/11,1/13,1/17,1/19,1/23,1/29\n";
    let one = rademacher(&["dist", "--threads", "1"], input);
    let four = rademacher(&["dist", "--threads", "4"], input);
    let (mut a, mut b) = (json_of(&one), json_of(&four));
    assert_eq!(a["config"]["threads"], 1);
    assert_eq!(b["config"]["threads"], 4);
    a["config"]["threads"] = Value::Null;
    b["config"]["threads"] = Value::Null;
    assert_eq!(a, b);
}

#[test]
fn thread_flag_overrides_environment() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rademacher"))
        .args(["prob", "--threads", "3"])
        .env("RADEMACHER_THREADS", "2")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1/2,1/2\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(json_of(&out)["config"]["threads"], 3);

    let mut child = Command::new(env!("CARGO_BIN_EXE_rademacher"))
        .arg("prob")
        .env("RADEMACHER_THREADS", "2")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1/2,1/2\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(json_of(&out)["config"]["threads"], 2);
}
