use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DEFAULT: &str = r#"{"problem":{"alpha":0.5,"beta0":1,"beta1":1,"kappa":0.3,"tau":0.5,"T":1,"eps":0.1},
  "numerics":{"n":120}}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impctl"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn constants_reports_the_default_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DEFAULT);
    let out = run(&["constants"], &cfg, &tmp.path().join("o"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/constants.json")).unwrap()).unwrap();
    assert_eq!(v["C0"], 0.75);
    assert_eq!(v["passed"], true);
    assert!(v["config_hash"].is_string());
}

#[test]
fn spectrum_and_evolve_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DEFAULT);
    let out_dir = tmp.path().join("o");
    assert!(run(&["spectrum"], &cfg, &out_dir).status.success());
    let spectrum = data_lines(&out_dir.join("spectrum.csv"));
    assert_eq!(spectrum[0], "index,eigenvalue");
    assert_eq!(spectrum.len(), 121);
    assert!(run(&["evolve"], &cfg, &out_dir).status.success());
    assert_eq!(data_lines(&out_dir.join("trajectory.csv"))[0], "t,x,u");
    assert_eq!(data_lines(&out_dir.join("norms.csv"))[0], "t,norm,ratio");
}

#[test]
fn synthesize_writes_control_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DEFAULT);
    let out_dir = tmp.path().join("o");
    let out = run(&["synthesize"], &cfg, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let control = data_lines(&out_dir.join("control.csv"));
    assert_eq!(control[0], "node,f");
    assert_eq!(control.len(), 121);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    for key in ["target_met", "terminal_identity", "cost_inequality"] {
        assert_eq!(report["certificates"][key]["ok"], true, "{key}");
    }
}

#[test]
fn alpha_sweep_has_one_row_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"problem":{"alpha":0.5,"beta0":1,"beta1":1,"kappa":0.3,"tau":0.5,"T":1,"eps":0.1},
            "numerics":{"n":100},
            "sweep":{"axes":[{"path":"problem.alpha","values":[0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9]}],
                     "outputs":["lambda1","log10K"]}}"#,
    );
    let out = run(&["sweep", "--workers", "2"], &cfg, &tmp.path().join("o"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_lines(&tmp.path().join("o/sweep.csv"));
    assert_eq!(rows[0], "alpha,lambda1,log10K");
    assert_eq!(rows.len(), 10);
    assert!(rows[1].starts_with("1.0000000000000001e-1,") || rows[1].starts_with("1.0000000000000000e-1,"));
}

#[test]
fn validation_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"problem":{"alpha":0.5,"beta0":1,"beta1":0,"kappa":0.3,"tau":0.5,"T":1,"eps":0.1}}"#,
    );
    let out = run(&["spectrum"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["field"], "problem.beta1");
}

#[test]
fn malformed_json_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "{\n  ]");
    let out = run(&["spectrum"], &cfg, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"]["line"], 2);
    assert_eq!(err["error"]["column"], 3);
}

#[test]
fn unknown_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"problem":{"alpha":0.5,"beta0":1,"beta1":1,"kappa":0.3,"tau":0.5,"T":1,"eps":0.1},"numerix":{}}"#,
    );
    let out = run(&["spectrum"], &cfg, &tmp.path().join("o"));
    assert!(!out.status.success());
    assert!(error_json(&out)["error"]["message"].as_str().unwrap().contains("numerix"));
}

#[test]
fn missing_config_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["spectrum"], &tmp.path().join("absent.json"), &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn seed_override_changes_only_seeded_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), DEFAULT);
    let read = |dir: &str| std::fs::read(tmp.path().join(dir).join("trajectory.csv")).unwrap();
    assert!(run(&["evolve", "--seed", "1"], &cfg, &tmp.path().join("a")).status.success());
    assert!(run(&["evolve", "--seed", "1"], &cfg, &tmp.path().join("b")).status.success());
    assert!(run(&["evolve", "--seed", "2"], &cfg, &tmp.path().join("c")).status.success());
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}
