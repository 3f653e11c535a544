use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn apc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const REQUEST: &str = r#"{
    "request": {
        "path": [{"length_km": 15.0, "f0": 0.85, "t2_eff": 0.1}],
        "target_fidelity": 0.87
    },
    "noise": {"p1": 0.0, "p2": 0.0, "p_meas": 0.0}
}"#;

#[test]
fn plan_prints_a_json_response() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "req.json", REQUEST);
    let out = apc(&["plan", &file]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["plan"]["feasible"], true);
    assert_eq!(v["plan"]["per_link"][0]["rounds"], 1);
}

#[test]
fn plan_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "req.json", REQUEST);
    let out = apc(&["plan", &file, "--rmax", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("experiment,point,axis1_name"));
    let row = lines.next().unwrap();
    assert!(row.contains(",false,"), "r = 0 cannot reach 0.87: {row}");
}

#[test]
fn invalid_and_malformed_requests_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_target = write(
        dir.path(),
        "bad.json",
        &REQUEST.replace("\"target_fidelity\": 0.87", "\"target_fidelity\": 1.5"),
    );
    let out = apc(&["plan", &bad_target]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));

    let garbage = write(dir.path(), "garbage.json", "{ not json");
    assert_eq!(apc(&["plan", &garbage]).status.code(), Some(2));
    assert_eq!(apc(&["sweep", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(apc(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_error_naming_the_path() {
    let out = apc(&["plan", "/nonexistent/req.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/req.json"));
}

#[test]
fn sweep_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("fig1.csv");
    let out = apc(&[
        "sweep",
        "--preset",
        "fig1",
        "--format",
        "csv",
        "--seed",
        "11",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "experiment,point,axis1_name,axis1,axis2_name,axis2,variant,selected_rounds,\
         rounds_per_link,selected_protocol,end_to_end_rounds,f_end,p_succ,makespan,goodput,\
         feasible,planning_time"
    );
    assert!(text.lines().filter(|l| l.contains(",apc,")).count() == 17);

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("fig1.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["spec"]["seed"], 11);
    assert_eq!(manifest["spec"]["experiment"], "goodput_vs_target");
}

#[test]
fn sweep_reads_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{
            "experiment": "noise_cliff",
            "fixed": {"hops": 2, "length_km": 8.0, "f0": 0.93, "target": 0.85},
            "axes": [{"param": "eps", "start": 1e-4, "end": 1e-2, "steps": 3, "spacing": "log"}],
            "seed": 3
        }"#,
    );
    let out = apc(&["sweep", &spec]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    let apc_rows: Vec<_> = rows.iter().filter(|r| r["variant"] == "apc").collect();
    assert_eq!(apc_rows.len(), 3);
    assert_eq!(apc_rows[2]["axis1"], 1e-2);

    let one_step = write(
        dir.path(),
        "bad_spec.json",
        r#"{"experiment": "noise_cliff", "axes": [{"param": "eps", "start": 1e-4, "end": 1e-2, "steps": 1}]}"#,
    );
    assert_eq!(apc(&["sweep", &one_step]).status.code(), Some(2));
}

#[test]
fn bench_reports_each_length() {
    let out = apc(&[
        "bench",
        "--lengths",
        "1,5",
        "--repeats",
        "1",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "length,mean_time,per_link_time");
    assert!(lines[1].starts_with("1,"));
    assert!(lines[2].starts_with("5,"));
}
