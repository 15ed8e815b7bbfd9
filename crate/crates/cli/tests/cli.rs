use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn run(dir: &Path, config: &Value, verb: &str) -> Output {
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_indoorloc"))
        .args(["--config", path.to_str().unwrap(), verb])
        .output()
        .unwrap()
}

fn ok(dir: &Path, config: &Value, verb: &str) -> String {
    let out = run(dir, config, verb);
    assert!(
        out.status.success(),
        "{verb} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, config: &Value, verb: &str) -> i32 {
    run(dir, config, verb).status.code().unwrap()
}

fn quiet_room() -> Value {
    json!({
        "out": "out",
        "filter": {"particles": 800, "n_prime_pct": 10, "sigma_base_m": 1.0, "sigma_per_m": 0.25, "seed": 7},
        "simulate": {
            "scenario": "single-room",
            "shadowing_sigma_db": 0.0,
            "mf_noise_sigma": 0.0,
            "instances_per_room": 30,
            "reference_samples": 1,
            "test_points": [[1.3, 2.6], [3.0, 1.0]],
            "dwell_s": 5.0,
            "coord_samples": 1
        }
    })
}

fn hashes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, Sha256::digest(fs::read(&p).unwrap()).to_vec())
        })
        .collect()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn minimal_room_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let cfg = quiet_room();
    ok(tmp.path(), &cfg, "simulate");
    for f in ["environment.json", "survey.csv", "coord_survey.csv", "reference_points.csv", "trace.csv", "observations.csv"] {
        let len = fs::metadata(tmp.path().join("out").join(f)).unwrap().len();
        assert!(len > 0, "{f} is empty");
    }
    ok(tmp.path(), &cfg, "fit-ranging");
    ok(tmp.path(), &cfg, "localize");
    let r = report(tmp.path());
    assert_eq!(r["method"], "pfml");
    assert_eq!(r["errors_m"].as_array().unwrap().len(), 30);
    let mean = r["mean_m"].as_f64().unwrap();
    assert!(mean <= 0.5, "pfml mean error {mean}");
    let text = ok(tmp.path(), &cfg, "report");
    assert!(text.starts_with("pfml: n 30"), "{text}");
    let cdf = fs::read_to_string(tmp.path().join("out/error_cdf.csv")).unwrap();
    assert_eq!(cdf.lines().count(), 31);
    assert!(cdf.trim_end().ends_with(",1"));
    let est = fs::read_to_string(tmp.path().join("out/estimates.csv")).unwrap();
    assert!(est.starts_with("t,x,y,true_x,true_y,error_m,degenerate\n"));
}

#[test]
fn same_seed_same_bytes() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = quiet_room();
    for d in [&a, &b] {
        ok(d.path(), &cfg, "simulate");
        ok(d.path(), &cfg, "fit-ranging");
        ok(d.path(), &cfg, "localize");
        fs::remove_file(d.path().join("out/timing.json")).unwrap();
    }
    let (ha, hb) = (hashes(&a.path().join("out")), hashes(&b.path().join("out")));
    assert_eq!(ha.len(), 9);
    assert_eq!(ha, hb);

    let mut other = cfg.clone();
    other["seed"] = json!(43);
    ok(b.path(), &other, "simulate");
    assert_ne!(ha["survey.csv"], hashes(&b.path().join("out"))["survey.csv"]);
}

#[test]
fn nlst_with_exact_ranges() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = quiet_room();
    cfg["method"] = json!("nlst");
    ok(tmp.path(), &cfg, "simulate");
    ok(tmp.path(), &cfg, "fit-ranging");
    ok(tmp.path(), &cfg, "localize");
    let r = report(tmp.path());
    let mean = r["mean_m"].as_f64().unwrap();
    assert!(mean <= 1e-6, "nlst mean error {mean}");
    assert_eq!(r["degenerate_steps"], 0);
}

#[test]
fn knn_needs_a_coordinate_db() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = quiet_room();
    cfg["method"] = json!("knn");
    cfg["knn_k"] = json!(1);
    ok(tmp.path(), &cfg, "simulate");
    ok(tmp.path(), &cfg, "localize");
    assert_eq!(report(tmp.path())["method"], "knn");
    fs::remove_file(tmp.path().join("out/coord_survey.csv")).unwrap();
    assert_eq!(code(tmp.path(), &cfg, "localize"), 2);
}

#[test]
fn survey_time_examples() {
    let tmp = TempDir::new().unwrap();
    let pfml = json!({"out": "out", "survey_time": {"method": "pfml", "instances": 3712, "rate_hz": 3, "ranging_minutes": 28}});
    assert!(ok(tmp.path(), &pfml, "survey-time").contains("(~49 min)"));
    let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/survey_time.json")).unwrap()).unwrap();
    assert!((v["minutes"].as_f64().unwrap() - (3712.0 / 180.0 + 28.0)).abs() < 1e-12);

    let knn = json!({"out": "out", "survey_time": {"method": "knn", "survey_points": 85, "t_sp_s": 300, "t_sw_s": 5, "instances": 5060}});
    assert!(ok(tmp.path(), &knn, "survey-time").contains("(~460 min)"));

    let zero = json!({"out": "out", "survey_time": {"method": "pfml", "instances": 0, "ranging_minutes": 0}});
    assert!(ok(tmp.path(), &zero, "survey-time").contains("0.00 min"));

    let negative = json!({"out": "out", "survey_time": {"method": "knn", "survey_points": -5, "t_sp_s": 300, "t_sw_s": 5, "instances": 10}});
    assert_eq!(code(tmp.path(), &negative, "survey-time"), 2);
    assert_eq!(code(tmp.path(), &json!({}), "survey-time"), 2);
}

#[test]
fn bad_configs_exit_2() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("broken.json");
    fs::write(&path, "{ not json").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_indoorloc"))
        .args(["--config", path.to_str().unwrap(), "simulate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid config"));

    let mut cfg = quiet_room();
    cfg["simulate"]["instances_per_room"] = json!(-3);
    assert_eq!(code(tmp.path(), &cfg, "simulate"), 2);
    let mut cfg = quiet_room();
    cfg["simulate"]["instances_per_room"] = json!(0);
    assert_eq!(code(tmp.path(), &cfg, "simulate"), 2);
    let mut cfg = quiet_room();
    cfg["simulate"]["scenario"] = json!("castle");
    assert_eq!(code(tmp.path(), &cfg, "simulate"), 2);
    assert_eq!(code(tmp.path(), &json!({"particles": 10}), "simulate"), 2);
    assert_eq!(code(tmp.path(), &json!({"method": "sonar"}), "localize"), 2);
    let mut cfg = quiet_room();
    cfg["filter"]["particles"] = json!(0);
    assert_eq!(code(tmp.path(), &cfg, "localize"), 2);
    // inputs missing
    assert_eq!(code(tmp.path(), &quiet_room(), "evaluate-landmark"), 2);
    assert_eq!(code(tmp.path(), &quiet_room(), "localize"), 2);
    assert_eq!(code(tmp.path(), &quiet_room(), "report"), 2);
}

#[test]
fn two_anchor_nlst_is_degenerate() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "out": "out",
        "method": "nlst",
        "simulate": {"scenario": "mirrored", "instances_per_room": 10, "reference_samples": 1, "dwell_s": 1.0, "coord_samples": 1}
    });
    ok(tmp.path(), &cfg, "simulate");
    ok(tmp.path(), &cfg, "fit-ranging");
    let out = run(tmp.path(), &cfg, "localize");
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("out/report.json").is_file());
}

fn accuracy_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("out/landmark_accuracy.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn landmark_table_on_mirrored_rooms() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "out": "out",
        "folds": 5,
        "simulate": {"scenario": "mirrored", "shadowing_sigma_db": 3.0, "mf_noise_sigma": 0.5, "instances_per_room": 40,
                     "reference_samples": 1, "dwell_s": 1.0, "coord_samples": 1}
    });
    ok(tmp.path(), &cfg, "simulate");
    ok(tmp.path(), &cfg, "evaluate-landmark");
    let rows = accuracy_rows(tmp.path());
    let acc = |c: &str, f: &str| -> f64 {
        rows.iter().find(|r| r[0] == c && r[1] == f).unwrap()[4].parse().unwrap()
    };
    for c in ["kstar", "knn"] {
        assert!(acc(c, "wifi+mf") >= acc(c, "wifi"), "{c}: {rows:?}");
        assert_eq!(acc(c, "wifi+mf"), 100.0);
    }
    assert!(rows.iter().all(|r| r[3] == "5"));
}

#[test]
fn landmark_single_class_and_ablation_rows() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir_all(&out).unwrap();
    let mut csv = String::from("room,AN1,AN2,AN3,AN4,AN5,AN6,AN7,AN8,mf_v,mf_h\n");
    for i in 0..20 {
        let v: Vec<String> = (0..10).map(|j| format!("{}", -40.0 - ((i * 7 + j * 3) % 11) as f64)).collect();
        csv.push_str(&format!("lobby,{}\n", v.join(",")));
    }
    fs::write(out.join("survey.csv"), csv).unwrap();
    ok(tmp.path(), &json!({"out": "out"}), "evaluate-landmark");
    let rows = accuracy_rows(tmp.path());
    assert!(rows.iter().all(|r| r[4] == "100"), "{rows:?}");
    let ablation: Vec<&str> = rows
        .iter()
        .filter(|r| r[1].ends_with("ablation"))
        .map(|r| r[2].as_str())
        .collect();
    assert_eq!(ablation, ["6", "7", "8"]);
}

#[test]
fn global_flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = quiet_room();
    let path = tmp.path().join("run.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let other = tmp.path().join("elsewhere");
    let status = Command::new(env!("CARGO_BIN_EXE_indoorloc"))
        .args(["simulate", "--config", path.to_str().unwrap(), "--seed", "5", "--out", other.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(other.join("survey.csv").is_file());
    assert!(!tmp.path().join("out").exists());
}
