use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[inversion]
q = 1.148698354997035
h_min = 0.1
noise_level = 0.05

[experiment]
data_mesh_h = 0.1
direct_mesh_h = 0.3
"#;

fn bilevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilevel")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = bilevel(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--emit-fields", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("bilevel") && text.contains("direct") && text.contains("DISCREPANCY"), "{text}");
    for name in
        ["bilevel.csv", "direct.csv", "summary.txt", "mesh_0.txt", "mesh_100.txt", "mesh_200.txt", "field_data_200.txt"]
    {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let csv = fs::read_to_string(out.join("bilevel.csv")).unwrap();
    assert!(csv.starts_with("j,residual,error,t_total,t_refine,t_step,t_residual,mesh_id,h\n"));
}

#[test]
fn noise_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = bilevel(&["run", "--config", &cfg, "--noise", "0.2", "--out", out.to_str().unwrap(), "--parallel"]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.starts_with("noise_level = 0.2\n"), "{summary}");
    assert!(!out.join("mesh_0.txt").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(bilevel(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    for bad in [
        "inversion.tau = 0.5",
        "inversion.unknown = 1",
        "geometry.wave_number = \"fast\"",
        "experiment.direct_mesh_h = 0.9",
    ] {
        let cfg = write_config(dir.path(), bad);
        let o = bilevel(&["run", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{bad}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("configuration error"));
    }
    let cfg =
        write_config(dir.path(), "geometry.source = [-0.5, 0.5, -0.5, 0.5]\ngeometry.buffer = [-0.4, 0.4, -0.4, 0.4]");
    assert_eq!(bilevel(&["verify", "--suite", "adjoint", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn run_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = bilevel(&["run", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_suites_pass() {
    for suite in ["adjoint", "monotonicity"] {
        let o = bilevel(&["verify", "--suite", suite]);
        assert_eq!(o.status.code(), Some(0), "{suite}");
        assert!(stdout(&o).trim_end().ends_with("PASS"));
    }
}

#[test]
fn usage_errors_are_rejected() {
    assert_ne!(bilevel(&["run", "--serial", "--parallel"]).status.code(), Some(0));
    assert_ne!(bilevel(&["verify", "--suite", "spectral"]).status.code(), Some(0));
}
