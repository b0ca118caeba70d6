use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn endgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_endgate"))
        .args(args)
        .env_remove("ENDGATE_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const REPEATED: &str = r#"
experiment = "endgate"
[chain]
n_sites = 8
coupling_model = "xy"
[chain.disorder]
relative_amplitude = 0.05
seed = 4
[schedule]
kind = "repeated"
tau = "first_peak"
max_gates = 300
residual_tolerance = 0.01
[single_shot]
window = 100.0
"#;

#[test]
fn validate_accepts_and_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.toml", REPEATED);
    let out = endgate(&["validate", "--config", good.to_str().unwrap()]);
    assert!(out.status.success());

    let bad = write(
        tmp.path(),
        "bad.toml",
        &REPEATED.replace("max_gates = 300", "max_gates = 0"),
    );
    let out = endgate(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let missing = tmp.path().join("nope.toml");
    let out = endgate(&["validate", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", REPEATED);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = endgate(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["trajectory.csv", "summary.json", "schedule.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("# endgate trajectory schema=1\nk,time,p,c_abs,d_abs,gate_applied\n"));
    let s = summary(&a);
    assert!(s["final_p"].as_f64().unwrap() >= 0.99);
    assert!(s.get("wall_time_s").is_none());
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", REPEATED);
    let dir = tmp.path().join("o");
    let out = endgate(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "77",
    ]);
    assert!(out.status.success());
    assert_eq!(summary(&dir)["chain"]["disorder"]["seed"], 77);
}

#[test]
fn json_config_and_json_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "experiment": "single_shot",
        "chain": {"n_sites": 6, "coupling_model": "engineered"},
        "single_shot": {"window": 3.0, "resolution": 0.01},
        "output": {"format": "json", "record_wall_time": true}
    }"#;
    let path = write(tmp.path(), "c.json", cfg);
    let dir = tmp.path().join("o");
    let out = endgate(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let traj: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(traj["schema"], 1);
    let s = summary(&dir);
    assert!((s["peak_time"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    assert!(s["wall_time_s"].as_f64().is_some());
}

#[test]
fn export_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        r#"
experiment = "endgate"
[chain]
n_sites = 8
coupling_model = "engineered"
[schedule]
kind = "explicit"
intervals = [1.5707963267948966]
"#,
    );
    let dir = tmp.path().join("o");
    let out = endgate(&[
        "export",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let sched_path = dir.join("schedule.json");
    let sched: Value = serde_json::from_str(&fs::read_to_string(&sched_path).unwrap()).unwrap();
    assert_eq!(sched["steps"].as_array().unwrap().len(), 1);
    assert!(sched["steps"][0]["d_re"].as_f64().unwrap().abs() < 1e-6);
    assert!(!dir.join("summary.json").exists());

    let out = endgate(&["replay", sched_path.to_str().unwrap()]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() <= 1e-9);

    // a tampered probability is a numerical failure
    let text = fs::read_to_string(&sched_path).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["steps"][0]["p"] = Value::from(0.5);
    let bad = write(tmp.path(), "bad.json", &v.to_string());
    assert_eq!(
        endgate(&["replay", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn switched_run_round_trips_through_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        r#"
experiment = "switched"
[chain]
n_sites = 6
coupling_model = "xy"
field_strength = 20.0
[switch]
kind = "field"
[greedy]
step_budget = 15
"#,
    );
    let dir = tmp.path().join("o");
    assert!(endgate(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap()
    ])
    .status
    .success());
    let out = endgate(&["replay", dir.join("schedule.json").to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        &(REPEATED.replace("\"endgate\"\n[chain]", "\"sweep\"\n[chain]")
            + "[sweep]\naxis = \"seed\"\nvalues = [5, 1, 9, 2]\nbase = \"endgate\"\n"),
    );
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tmp.path().join(format!("t{threads}"));
        let out = endgate(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push(fs::read(dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let values: Vec<&str> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(values.len(), 4);
    assert!(values[0].starts_with("5.0"));

    // `run` refuses a sweep config
    let out = endgate(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
