use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = "k_m = 600\ntotal_slots = 1200\nn_elements = 12\nplacement_min_m = -100\nplacement_max_m = 100\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-coverage"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scenario.toml"), SCENARIO).unwrap();
    dir
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = workspace();
    fs::write(
        dir.path().join("spec.toml"),
        "figure_family = \"coverage_vs_placement\"\nswept_values = [-50, 0, 50]\nschemes = [\"ideal_phase\", \"random_phase\"]\n",
    )
    .unwrap();
    let out = run(dir.path(), &["run", "--config", "scenario.toml", "--spec", "spec.toml", "--out", "out", "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/coverage_vs_placement.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "figure_family,scheme,series_param,series_level,swept_param,swept_value,slot,metric_name,value,stderr,seed,config_hash"
    );
    assert_eq!(lines.count(), 6);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/coverage_vs_placement.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["rows"], 6);
}

#[test]
fn set_overrides_change_the_hash() {
    let dir = workspace();
    fs::write(
        dir.path().join("spec.toml"),
        "figure_family = \"distance_vs_power\"\nswept_values = [30]\nschemes = [\"without_ris\"]\n",
    )
    .unwrap();
    let hash = |extra: &[&str]| {
        let mut args = vec!["run", "--config", "scenario.toml", "--spec", "spec.toml", "--out", "o"];
        args.extend_from_slice(extra);
        let out = run(dir.path(), &args);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["config_hash"].as_str().unwrap().to_owned()
    };
    assert_ne!(hash(&[]), hash(&["--set", "n_elements=20"]));
}

#[test]
fn validate_reports_audit() {
    let dir = workspace();
    let out = run(dir.path(), &["validate", "--config", "scenario.toml", "--slots", "3", "--trials", "10000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["all_pass"], true);
}

#[test]
fn optimize_prints_placement() {
    let dir = workspace();
    let out = run(dir.path(), &["optimize", "--config", "scenario.toml", "--scheme", "ideal_phase"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["placements"].as_array().unwrap().len(), 5);
    assert_eq!(v["d_ris_l_star_m"], 0.0);
}

#[test]
fn exit_codes() {
    let dir = workspace();
    fs::write(dir.path().join("bad.toml"), "figure_family = \"distance_vs_power\"\nschemes = [\"without_ris\"]\n").unwrap();
    let invalid = run(dir.path(), &["run", "--config", "scenario.toml", "--spec", "bad.toml", "--out", "o"]);
    assert_eq!(invalid.status.code(), Some(2));
    let missing = run(dir.path(), &["optimize", "--config", "nope.toml", "--scheme", "ideal_phase"]);
    assert_eq!(missing.status.code(), Some(1));
    fs::write(dir.path().join("broken.toml"), "n_elements = \"many\"\n").unwrap();
    let broken = run(dir.path(), &["optimize", "--config", "broken.toml", "--scheme", "ideal_phase"]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("n_elements"));
}
