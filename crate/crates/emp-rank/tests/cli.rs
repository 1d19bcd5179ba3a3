use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn emp_rank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emp-rank"))
        .args(args)
        .env_remove("EMP_RANK_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid JSON on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn identical_four_node(dir: &Path) -> PathBuf {
    write(
        dir,
        "net.json",
        r#"{
            "n": 4,
            "modules": [
                { "family": "first_order", "theta": [0.5, 1.0] },
                { "family": "first_order", "theta": [0.5, 1.0] },
                { "family": "first_order", "theta": [0.5, 1.0] }
            ]
        }"#,
    )
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn enumerate_lists_all_minimal_patterns() {
    for (n, count) in [(3, 2), (4, 4), (6, 16)] {
        let v = json(&emp_rank(&["enumerate", "-n", &n.to_string(), "--format", "json"]));
        assert_eq!(v["emps"].as_array().unwrap().len(), count);
    }
    let v = json(&emp_rank(&["enumerate", "-n", "4", "--format", "json"]));
    let labels: Vec<&str> = v["emps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["I", "III", "IV", "II"]);
    let mirrors: Vec<u64> = v["emps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["mirror"].as_u64().unwrap())
        .collect();
    assert_eq!(mirrors, [3, 1, 2, 0]);
}

#[test]
fn enumerate_rejects_out_of_range_n() {
    assert_eq!(emp_rank(&["enumerate", "-n", "1"]).status.code(), Some(2));
}

#[test]
fn rank_puts_balanced_split_first() {
    let dir = TempDir::new().unwrap();
    let net = identical_four_node(dir.path());
    let v = json(&emp_rank(&["rank", "--network", arg(&net), "--format", "json"]));
    assert_eq!(v["ranking"][0]["emp"], "B=1,2;C=3,4");
    assert_eq!(v["a_optimal"], "B=1,2;C=3,4");
    let v = json(&emp_rank(&[
        "rank",
        "--network",
        arg(&net),
        "--criterion",
        "logdet",
        "--format",
        "json",
    ]));
    assert_eq!(v["criterion"], "logdet");
    assert!(v["a_optimal"].is_string() && v["d_optimal"].is_string());
}

#[test]
fn rank_with_theorem_checks_passes_on_identical_modules() {
    let dir = TempDir::new().unwrap();
    let net = identical_four_node(dir.path());
    let o = emp_rank(&["rank", "--network", arg(&net), "--check-theorems"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");
    let o = emp_rank(&["check", "--network", arg(&net)]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn analyze_reports_one_pattern() {
    let dir = TempDir::new().unwrap();
    let net = identical_four_node(dir.path());
    let v = json(&emp_rank(&[
        "analyze",
        "--network",
        arg(&net),
        "--emp",
        "B=1,2;C=3,4",
        "--format",
        "json",
    ]));
    assert_eq!(v["informative"], true);
}

#[test]
fn unstable_module_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let net = write(
        dir.path(),
        "bad.json",
        r#"{ "n": 3, "modules": [
            { "family": "first_order", "theta": [0.5, 1.0] },
            { "family": "first_order", "theta": [1.5, 1.0] } ] }"#,
    );
    let o = emp_rank(&["rank", "--network", arg(&net)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unstable"));
}

#[test]
fn non_informative_pattern_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let net = write(
        dir.path(),
        "zero.json",
        r#"{ "n": 3, "modules": [
            { "family": "fir", "theta": [1.0, 0.5] },
            { "family": "fir", "theta": [0.0, 0.0] } ] }"#,
    );
    // G1 is only seen through the zero G2 on the path 1 -> 3.
    let o = emp_rank(&["analyze", "--network", arg(&net), "--emp", "B=1,2;C=3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn montecarlo_s1_always_picks_iii() {
    let v = json(&emp_rank(&[
        "montecarlo",
        "--scenario",
        "S1",
        "--runs",
        "100",
        "--seed",
        "3",
        "--format",
        "json",
    ]));
    let counts: Vec<u64> = v["report"]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .collect();
    assert_eq!(counts, [0, 100, 0, 0]);
}

#[test]
fn montecarlo_output_is_reproducible_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = emp_rank(&[
            "--threads",
            threads,
            "montecarlo",
            "-n",
            "4",
            "--family",
            "first_order",
            "--runs",
            "200",
            "--seed",
            "17",
            "--out",
            arg(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "1");
    let b = run("b", "3");
    for file in ["report.csv", "report.json", "manifest.json"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    let report: emp_rank::report::MonteCarloReport =
        serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(
        report.report.counts.iter().sum::<usize>(),
        report.report.informative_runs
    );
    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 17);
}

#[test]
fn montecarlo_reads_config_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{ "n": 3, "family": "fir_butterworth", "runs": 20, "identical": true, "master_seed": 5 }"#,
    );
    let v = json(&emp_rank(&["montecarlo", "--config", arg(&cfg), "--format", "json"]));
    assert_eq!(v["report"]["config"]["n"], 3);
    assert_eq!(v["report"]["informative_runs"], 20);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{ "n": 1, "family": "first_order", "runs": 20 }"#,
    );
    assert_eq!(emp_rank(&["montecarlo", "--config", arg(&bad)]).status.code(), Some(2));
    assert_eq!(emp_rank(&["montecarlo", "--family", "bogus"]).status.code(), Some(2));
}

#[test]
fn seed_falls_back_to_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_emp-rank"))
        .args(["montecarlo", "--runs", "10", "--format", "json"])
        .env("EMP_RANK_SEED", "99")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_eq!(json(&o)["manifest"]["master_seed"], 99);
}

#[test]
fn validate_matches_the_bound_and_rejects_few_replications() {
    let dir = TempDir::new().unwrap();
    let net = write(
        dir.path(),
        "fir.json",
        r#"{ "n": 2, "modules": [ { "family": "fir", "theta": [0.8, -0.4] } ] }"#,
    );
    let v = json(&emp_rank(&[
        "validate",
        "--network",
        arg(&net),
        "--emp",
        "B=1;C=2",
        "-N",
        "2000",
        "--replications",
        "200",
        "--seed",
        "1",
        "--format",
        "json",
    ]));
    assert!(v["deviation"].as_f64().unwrap() < 0.15);
    let o = emp_rank(&[
        "validate",
        "--network",
        arg(&net),
        "--emp",
        "B=1;C=2",
        "--replications",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_a_dataset() {
    let dir = TempDir::new().unwrap();
    let net = identical_four_node(dir.path());
    let out = dir.path().join("data.csv");
    let o = emp_rank(&[
        "simulate",
        "--network",
        arg(&net),
        "--emp",
        "B=1,2;C=3,4",
        "-N",
        "100",
        "--seed",
        "4",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,r1,r2,y3,y4"));
    assert_eq!(lines.count(), 100);
}
