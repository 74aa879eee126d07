use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn one21(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_one21"))
        .args(args)
        .current_dir(dir)
        .env_remove("ONE21_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn close(v: &Value, expected: f64, tol: f64) -> bool {
    v.as_f64().is_some_and(|x| (x - expected).abs() <= tol)
}

#[test]
fn optimal_reports_best_placement() {
    let dir = tempfile::tempdir().unwrap();
    let out = one21(&["optimal", "--gamma", "1e6", "--alpha", "2", "--dist", "100"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(close(&v["cstar_bits"], 2.0 * 100f64.log2(), 1e-9));
    assert!(close(&v["eps_topology_capacity_bits"], 12.33859536642353, 1e-9));
    assert!(close(&v["closed_form_bits"], 12.33859536642353, 1e-9));
    assert_eq!(v["hypothesis_holds"], Value::Bool(true));
}

#[test]
fn capacity_flow_and_cut_agree() {
    let dir = tempfile::tempdir().unwrap();
    let run = |form: &str| {
        let out = one21(&["capacity", "--relay", "10,0", "--relay", "90,0", "--formulation", form], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        json(&out)["capacity_bits"].as_f64().unwrap()
    };
    let (flow, cut) = (run("flow"), run("cutset"));
    assert!((flow - 10.349845192618007).abs() < 1e-9);
    assert!((flow - cut).abs() < 1e-6);
}

#[test]
fn capacity_dumps_program_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = one21(&["capacity", "--relay", "30,5", "--relay", "70,-5", "--dump-lp"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let lp = json(&out)["lp"].as_str().unwrap().to_string();
    assert!(lp.contains("conserve_1") && lp.contains("tx_0"));
}

#[test]
fn verify_all_passes_at_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = one21(&["verify", "--suite", "all", "--instances", "10", "--random-instances", "20", "--grid", "20"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.matches("result: PASS").count(), 7);
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn verify_fails_when_hypothesis_is_violated() {
    let dir = tempfile::tempdir().unwrap();
    let out = one21(&["verify", "--suite", "theorem", "--dist", "400"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("result: FAIL"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["capacity", "--gamma", "-1"][..],
        &["capacity", "--alpha", "0"],
        &["capacity", "--relay", "nonsense"],
        &["verify", "--suite", "nosuch"],
        &["compare-line", "--d-min", "600", "--d-max", "50"],
        &["bogus-command"],
    ] {
        let out = one21(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn sweep_beta_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = one21(&["sweep-beta", "--grid", "99", "--out", "sweep"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("beta,capacity_bits,lambda2_star,regime"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 99);
    for r in &rows {
        let beta: f64 = r[0].parse().unwrap();
        assert_eq!(r[3], if beta > 1.0 / 3.0 { "routing" } else { "multipath" });
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert!(report["config"].is_object() && report["summary"].is_object());
    assert!(close(&report["summary"]["first_routing_beta"], 0.335, 1e-12));
}

#[test]
fn monte_carlo_matches_reference_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = one21(&["monte-carlo", "--seed", "0", "--samples", "200", "--out", "mc"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["samples"], Value::from(200));
    assert_eq!(v["samples_above_reference"], Value::from(0));
    let ratio = v["mean_ratio"].as_f64().unwrap();
    assert!((0.35..=0.75).contains(&ratio), "{ratio}");
    let csv = std::fs::read_to_string(dir.path().join("mc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn compare_line_locates_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let out = one21(&["compare-line", "--out", "cmp"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(close(&v["flip_approx"], 1000.0 / 3.0, 25.0));
    assert!(close(&v["flip_exact"], 1000.0 / 3.0, 50.0));
}

#[test]
fn reruns_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &["monte-carlo", "--seed", "42", "--samples", "300", "--out", "run"],
        &["sweep-beta", "--grid", "49", "--out", "run"],
        &["compare-line", "--grid", "12", "--out", "run"],
        &["verify", "--suite", "all", "--instances", "5", "--random-instances", "10", "--grid", "10"],
    ];
    for args in cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (oa, ob) = (one21(args, a.path()), one21(args, b.path()));
        assert_eq!(oa.stdout, ob.stdout, "{args:?}");
        assert_eq!(oa.status.code(), ob.status.code());
        for ext in ["run.csv", "run.json"] {
            if a.path().join(ext).exists() {
                assert_eq!(std::fs::read(a.path().join(ext)).unwrap(), std::fs::read(b.path().join(ext)).unwrap(), "{args:?} {ext}");
            }
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["monte-carlo", "--seed", "3", "--samples", "100", "--out", "run"];
    let dir = tempfile::tempdir().unwrap();
    let single = Command::new(env!("CARGO_BIN_EXE_one21")).args(args).current_dir(dir.path()).env("ONE21_THREADS", "1").output().unwrap();
    let csv_single = std::fs::read(dir.path().join("run.csv")).unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_one21")).args(args).current_dir(dir.path()).env("ONE21_THREADS", "4").output().unwrap();
    let csv_many = std::fs::read(dir.path().join("run.csv")).unwrap();
    assert_eq!(single.stdout, many.stdout);
    assert_eq!(csv_single, csv_many);
}
