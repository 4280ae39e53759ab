use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn geospot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geospot")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    let help = geospot(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for cmd in ["simulate", "sweep", "calibrate", "optimize", "report", "reproduce"] {
        assert!(stdout(&help).contains(cmd), "{cmd} missing from help");
    }
    assert_eq!(geospot(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(geospot(&["simulate", "--frobnicate"]).status.code(), Some(64));
    assert_eq!(geospot(&[]).status.code(), Some(64));
    assert_eq!(geospot(&["sweep", "x.json"]).status.code(), Some(64));
}

#[test]
fn missing_scenario_exits_2() {
    let o = geospot(&["simulate", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario not found"), "{}", stderr(&o));
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("scenarios/a2_cv.json")).unwrap().replace("\"T4\"", "\"H100\"");
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let o = geospot(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("H100"));
}

#[test]
fn simulate_prints_summary() {
    let o = geospot(&["simulate", data("scenarios/a8_cv.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("A-8-CV"));
}

#[test]
fn bundled_names_resolve_against_data_dir() {
    let o = geospot(&["simulate", "scenarios/a2_nlp.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("A-2-NLP"));
}

#[test]
fn sweep_prints_one_row_per_gpu_count() {
    let o = geospot(&["sweep", data("scenarios/a_cv.json").to_str().unwrap(), "--gpus", "1,2,3,4,6,8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    assert_eq!(&header[0], "scenario_id");
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 6);
    let gpus: Vec<&str> = records.iter().map(|r| &r[1]).collect();
    assert_eq!(gpus, ["1", "2", "3", "4", "6", "8"]);
    assert!(!text.contains('\r'));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let scenario = data("scenarios/c8_nlp.json");
    for dir in [&a, &b] {
        let o = geospot(&["sweep", scenario.to_str().unwrap(), "--gpus", "2,4,8", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for file in ["metrics.csv", "cost.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let list = |d: &Path| {
        let mut v: Vec<_> = fs::read_dir(d.join("reports")).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(list(a.path()), list(b.path()));
    for name in list(a.path()) {
        assert_eq!(fs::read(a.path().join("reports").join(&name)).unwrap(), fs::read(b.path().join("reports").join(&name)).unwrap());
    }
}

#[test]
fn output_set_has_manifest_and_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = geospot(&["simulate", data("scenarios/d3_nlp.json").to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.get("version").is_some());
    let report = geospot(&["report", out, "--format", "csv"]);
    assert_eq!(report.status.code(), Some(0), "{}", stderr(&report));
    assert!(stdout(&report).contains("D-3-NLP"));
    assert!(stdout(&report).contains("usd_per_1m_vm_only"));
}

#[test]
fn calibrate_prints_fitted_parameters() {
    let o = geospot(&["calibrate", "calibration_a10.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let beta = doc["comm"]["beta_s"].as_f64().unwrap();
    assert!((beta - 6.49601).abs() < 1e-4, "{beta}");
}

#[test]
fn optimize_ranks_placements() {
    let o = geospot(&["optimize", "scenarios/search_rxlm.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("objective: min-usd-per-million"));
    assert!(text.contains("dgx2x1"));
}

#[test]
fn impossible_budget_exits_3() {
    let o = geospot(&["optimize", "scenarios/search_conv.json", "--objective", "max-sps-under-budget", "--budget", "0.01"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"));
}

#[test]
fn budget_without_objective_needs_budget_objective() {
    let o = geospot(&["optimize", "scenarios/search_conv.json", "--objective", "max-sps-under-budget"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn reproduce_writes_table_and_flags_misses() {
    let dir = tempfile::tempdir().unwrap();
    let o = geospot(&["reproduce", "--out", dir.path().to_str().unwrap()]);
    // Published values that the model does not meet turn the exit code to 1.
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    assert!(stdout(&o).contains("checked cells within tolerance"));
    assert!(dir.path().join("reproduce.csv").is_file());
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = geospot(&["simulate", "scenarios/a2_cv.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
