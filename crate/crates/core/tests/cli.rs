use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kstrunc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstrunc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exponents_prints_table_and_json() {
    let out = kstrunc(&["exponents", "--N", "3", "--m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("finite_energy"), "{text}");
    let json = text.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["m_dstar"], "10");
    assert_eq!(v["regime"], "finite_energy");
}

#[test]
fn exponents_flags_two_dimensions_as_outside_theory() {
    let out = kstrunc(&["exponents", "--N", "2", "--m", "3/2"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("outside_theory"));
}

#[test]
fn stampacchia_prints_zero() {
    let out = kstrunc(&[
        "stampacchia",
        "--M",
        "1",
        "--delta",
        "2",
        "--gamma",
        "2",
        "--psi0",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "d = 4");
}

#[test]
fn stampacchia_with_unit_delta_is_a_config_error() {
    let out = kstrunc(&[
        "stampacchia",
        "--M",
        "1",
        "--delta",
        "1",
        "--gamma",
        "2",
        "--psi0",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "dup.json",
            r#"{"scenarios":[
              {"id":"x","dim":2,"cells":4,"theta":0.5,"t_final":0.01,"dt":0.01,"source":{"kind":"constant","value":1}},
              {"id":"x","dim":2,"cells":4,"theta":0.5,"t_final":0.01,"dt":0.01,"source":{"kind":"constant","value":1}}
            ]}"#,
        ),
        (
            "theta.json",
            r#"{"scenarios":[
              {"id":"x","dim":3,"cells":4,"theta":0.9,"t_final":0.01,"dt":0.01,"source":{"kind":"constant","value":1}}
            ]}"#,
        ),
        ("garbage.json", "{ not json"),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let out = kstrunc(&[
            "verify",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let out = kstrunc(&["solve", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn smoke_config_solves() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_dir().join("smoke.json");
    let out = kstrunc(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "summary.json",
        "smoke-constant_solve.csv",
        "smoke-constant_trajectory.json",
        "smoke-checkerboard_solve.csv",
    ] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
}

#[test]
fn shipped_configs_parse() {
    for name in ["smoke.json", "regimes.json", "refinement.json"] {
        kstrunc::harness::ExperimentConfig::load(&config_dir().join(name)).unwrap();
    }
}
