use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use turnpike_cli::{parse_config, validate_config, DEVIATION_HEADER, SWEEP_HEADER};

const SMALL: &str = r#"{
  "problem": {
    "variant": "robin",
    "a": -1, "b": 1, "R": 0.5, "s": 0.5,
    "beta": [{"start": -1.5, "end": -1, "value": 1}, {"start": 1, "end": 1.5, "value": 2}],
    "target": {"kind": "gaussian", "center": 0, "width": 0.3, "amplitude": 1}
  },
  "discretization": {"n": 24, "K": 8},
  "sweep": {"T": [1, 2, 4]},
  "probe": {"samples": 3, "seed": 5}
}"#;

fn turnpike(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnpike"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_into(config: &Path, out: &Path, jobs: &str) -> Output {
    turnpike(&[
        "run",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        jobs,
    ])
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn version_prints_schema() {
    let out = turnpike(&["version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("turnpike ") && text.contains("schema 1)"));
}

#[test]
fn validate_accepts_reference_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["reference_robin.json", "reference_dirichlet.json"] {
        assert_eq!(validate_config(&root.join(name)).unwrap(), vec![]);
        let out = turnpike(&["validate", root.join(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
}

#[test]
fn out_of_range_order_exits_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", &SMALL.replace("\"s\": 0.5", "\"s\": 1.5"));
    for args in [vec!["validate"], vec!["run"]] {
        let mut a = args.clone();
        a.push(cfg.to_str().unwrap());
        let out = turnpike(&a);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains("bad.json:4: problem.s:"), "{err}");
    }
}

#[test]
fn missing_horizons_yield_exactly_one_diagnostic() {
    let text = SMALL.replace("\"sweep\": {\"T\": [1, 2, 4]},", "");
    let diags = parse_config(&text).unwrap_err();
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].path, "sweep.T");
}

#[test]
fn all_violations_are_reported_in_stable_order() {
    let text = SMALL
        .replace("\"n\": 24", "\"n\": 4")
        .replace("\"s\": 0.5", "\"s\": -0.2");
    let first = parse_config(&text).unwrap_err();
    let paths: Vec<&str> = first.iter().map(|d| d.path.as_str()).collect();
    assert_eq!(paths, vec!["problem.s", "discretization.n"]);
    assert_eq!(parse_config(&text).unwrap_err(), first);
}

#[test]
fn unreadable_config_exits_2() {
    let out = turnpike(&["validate", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3_naming_the_horizon() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace(
        "\"sweep\": {\"T\": [1, 2, 4]},",
        "\"sweep\": {\"T\": [2]}, \"control\": {\"cg_tol\": 1e-14, \"max_iter\": 1},",
    );
    let cfg = write_config(&dir, "cap.json", &text);
    let out = run_into(&cfg, &dir.path().join("out"), "1");
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("T = 2"), "{err}");
}

#[test]
fn zero_target_gives_zero_deviations() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace(
        "{\"kind\": \"gaussian\", \"center\": 0, \"width\": 0.3, \"amplitude\": 1}",
        "{\"kind\": \"constant\", \"value\": 0}",
    );
    let cfg = write_config(&dir, "zero.json", &text);
    let out = dir.path().join("out");
    assert_eq!(run_into(&cfg, &out, "2").status.code(), Some(0));
    for t in ["1", "2", "4"] {
        let (header, rows) = read_csv(&out.join(format!("T_{t}/deviation.csv")));
        assert_eq!(header, DEVIATION_HEADER);
        for row in rows {
            assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
        }
    }
    let (_, rows) = read_csv(&out.join("sweep.csv"));
    assert!(rows.iter().all(|r| r[3] == "inf" && r[6] == "true"));
}

#[test]
fn artifacts_follow_the_published_schemas() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.json", SMALL);
    let out = dir.path().join("out");
    assert_eq!(run_into(&cfg, &out, "1").status.code(), Some(0));

    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(header, SWEEP_HEADER);
    assert_eq!(rows.len(), 3);
    for (row, t) in rows.iter().zip([1.0, 2.0, 4.0]) {
        assert_eq!(row[0].parse::<f64>().unwrap(), t);
        assert!(row[6] == "true" || row[6] == "false");
        let (dh, drows) = read_csv(&out.join(format!("T_{t}/deviation.csv")));
        assert_eq!(dh, DEVIATION_HEADER);
        assert_eq!(drows.len(), (t * 8.0) as usize + 1);
        assert_eq!(drows[0][0], "0.0000000000000000e0");
    }

    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for key in [
        "schema_version",
        "config",
        "steady",
        "horizons",
        "sweep",
        "wall_clock",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config"]["problem"]["variant"], "robin");
    assert_eq!(report["config"]["control"]["max_iter"], 500);
    let horizons = report["horizons"].as_array().unwrap();
    assert_eq!(horizons.len(), 3);
    assert_eq!(horizons[0]["probe"]["ratios"].as_array().unwrap().len(), 3);
    for h in horizons {
        assert!(h["cost"].as_f64().unwrap() <= h["cost_bound"].as_f64().unwrap());
    }
}

fn report_without_timing(dir: &Path) -> Value {
    let mut v: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_clock");
    v
}

#[test]
fn outputs_do_not_depend_on_parallelism_or_reruns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "small.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_into(&cfg, &a, "1").status.success());
    assert!(run_into(&cfg, &b, "4").status.success());
    for rel in [
        "sweep.csv",
        "T_1/deviation.csv",
        "T_2/deviation.csv",
        "T_4/deviation.csv",
    ] {
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
    assert_eq!(report_without_timing(&a), report_without_timing(&b));

    let first = fs::read(a.join("sweep.csv")).unwrap();
    assert!(run_into(&cfg, &a, "2").status.success());
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), first);
}

#[test]
fn format_selection_limits_artifacts() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace(
        "\"probe\": {\"samples\": 3, \"seed\": 5}",
        "\"probe\": {\"samples\": 0}, \"output\": {\"formats\": [\"json\"]}",
    );
    let cfg = write_config(&dir, "json.json", &text);
    let out = dir.path().join("out");
    assert!(run_into(&cfg, &out, "1").status.success());
    assert!(out.join("report.json").exists());
    assert!(!out.join("sweep.csv").exists());
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["horizons"][0]["probe"].is_null());
}
