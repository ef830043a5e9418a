use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "small"
description = "coarse grid for command-line tests"
layout.grid.n = 64
layout.free_space.mode = "nlos"
layout.free_space.geometry.z = 1.0
layout.free_space.geometry.d_iz = 0.2
solver.tolerance = 1e-3
sweep.parameter = "layout.receiver.pose.dy"
sweep.values = [-1.0e-3, 0.0, 1.0e-3]
"#;

fn rbswipt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbswipt"))
        .args(args)
        .env("RBSWIPT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn presets_list_names_every_preset() {
    let o = rbswipt(&["presets", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "baseline-los",
        "invasion-sweep",
        "distance-sweep",
        "horizontal-placement",
        "vertical-height",
        "translation-sweep",
        "rotation-sweep",
    ] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn presets_show_prints_the_file() {
    let o = rbswipt(&["presets", "show", "distance-sweep"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("sweep.parameter"));
    assert_eq!(rbswipt(&["presets", "show", "nope"]).status.code(), Some(1));
}

#[test]
fn solve_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let o = rbswipt(&["solve", &config, "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let eta = v["row"]["eta_o"].as_f64().unwrap();
    assert!(eta > 0.0 && eta <= 1.0);
    assert_eq!(v["scenario"], "small");
    assert_eq!(v["eta_includes_gain_transit"], false);
}

#[test]
fn seed_override_keeps_the_mode() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let eta = |seed: &str| {
        let o = rbswipt(&["solve", &config, "--seed", seed]);
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        v["row"]["eta_o"].as_f64().unwrap()
    };
    assert!((eta("1") - eta("99")).abs() < 1e-2);
}

#[test]
fn scenario_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        rbswipt(&["solve", "/no/such/file.toml"]).status.code(),
        Some(1)
    );
    let bad = write_config(dir.path(), "layout.free_space.geometry.zz = 1.0");
    let o = rbswipt(&["solve", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zz"));
    let no_sweep = write_config(dir.path(), "layout.grid.n = 64");
    let out = dir.path().join("x.csv");
    let o = rbswipt(&["sweep", &no_sweep, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(
        rbswipt(&["sweep", "x.toml", "--out", "y", "--format", "xml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(rbswipt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rbswipt(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_rbswipt"))
            .args([
                "sweep",
                &config,
                "--out",
                out.to_str().unwrap(),
                "--format",
                "csv",
                "--seed",
                "3",
            ])
            .env("RBSWIPT_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}

#[test]
fn sweep_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("rows.json");
    let o = rbswipt(&[
        "sweep",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["value"].as_f64(), Some(-1.0e-3));
}

#[test]
fn validate_passes() {
    let o = rbswipt(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(text.lines().count() >= 10);
}
