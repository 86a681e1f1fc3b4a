use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fracext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracext"))
        .args(args)
        .env_remove("FRACEXT_THREADS")
        .output()
        .expect("binary runs")
}

fn temp(name: &str, content: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("fracext-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, content).unwrap();
    path
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn harmonics_exact_rational() {
    let o = fracext(&["harmonics", "--n", "2", "--gamma", "1/4", "--sector", "neumann", "--m", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["count"], 4);
    assert_eq!(v["defects"], json!([]));
}

#[test]
fn gamma_one_half_exits_with_config_code() {
    let o = fracext(&["harmonics", "--n", "1", "--gamma", "1/2", "--sector", "dirichlet", "--m", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("1/2"));
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let cfg = temp("bad.json", r#"{"n": 2, "gamma": 0.3, "colour": "red"}"#);
    let o = fracext(&["--config", cfg.to_str().unwrap(), "constants"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_fracext"))
        .args(["verify", "--only", "1"])
        .env("FRACEXT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unsolvable_source_exits_with_solver_code() {
    let f = json!({"n": 1, "gamma": 0.25, "atoms": [
        {"coeff": 1.0, "y": {"int": 2, "g": 0}, "beta": [0], "r": {"int": -5, "g": -2}}
    ]});
    let input = temp("even.json", &f.to_string());
    let o = fracext(&["solve-homogeneous", input.to_str().unwrap(), "--sector", "dirichlet"]);
    assert_eq!(o.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err.get("remainder").is_some());

    let o = fracext(&["solve-homogeneous", input.to_str().unwrap(), "--sector", "dirichlet", "--projected"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout_json(&o)["relative_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn verify_subset_and_failure_code() {
    let o = fracext(&["verify", "--only", "1,4"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS  4"));

    let cfg = temp("tight.json", r#"{"tolerances": {"convolution_relative": 1e-12}}"#);
    let o = fracext(&["--config", cfg.to_str().unwrap(), "verify", "--only", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL  7"));
}

#[test]
fn expansion_is_deterministic_in_the_seed() {
    let run = |seed: &str| {
        let o = fracext(&["--seed", seed, "expand", "--n", "2", "--gamma", "0.25", "--kind", "poisson", "--order", "1"]);
        assert_eq!(o.status.code(), Some(0));
        o.stdout
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5"), run("6"));
}

#[test]
fn expand_requires_an_order() {
    let o = fracext(&["expand", "--n", "2", "--gamma", "0.25", "--kind", "poisson"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`order`"));
}

#[test]
fn fd_solve_writes_csv() {
    let cfg = temp(
        "fd.json",
        &json!({
            "grid": {"gamma": 0.25, "height": 2.0, "layers": 16,
                     "axes": [{"kind": "periodic", "nodes": 8, "length": std::f64::consts::TAU}]},
            "boundary": {"kind": "dirichlet", "modes": [{"k": [1.0], "amplitude": 1.0}]},
            "format": "csv"
        })
        .to_string(),
    );
    let out = std::env::temp_dir().join(format!("fracext-cli-{}-field.csv", std::process::id()));
    let o = fracext(&["--config", cfg.to_str().unwrap(), "fd-solve", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some("y,x1,value"));
    assert_eq!(csv.lines().count(), 1 + 17 * 8);
}
