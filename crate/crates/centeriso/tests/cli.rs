//! The command layer end to end: exit codes, report contents and
//! byte-for-byte reproducibility.

use std::path::{Path, PathBuf};

use centeriso::cli::{run, EXIT_BUDGET, EXIT_INPUT, EXIT_OK, EXIT_TOLERANCE};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join("centeriso-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn call(args: &[&str]) -> i32 {
    run(std::iter::once("centeriso").chain(args.iter().copied()))
}

const CONSTANT: &str = r#"{
  "name": "constant",
  "system": {"base": [[2, 1], [1, 1]], "coupling": [{"mode": [1, 0], "cos": 1.0}], "frequencies": [0.618034], "center_dim": 1},
  "potential": {"kind": "constant", "value": 0.25},
  "livsic": {"max_period": 5}
}"#;

#[test]
fn livsic_passes_and_report_is_reproducible() {
    let d = scratch("livsic");
    let cfg = write_config(&d, CONSTANT);
    let out = d.join("out");
    let args = [
        "livsic",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(call(&args), EXIT_OK);
    let first = std::fs::read(out.join("report.json")).unwrap();
    assert_eq!(call(&args), EXIT_OK);
    assert_eq!(first, std::fs::read(out.join("report.json")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["command"], "livsic");
    assert_eq!(report["status"], "pass");
    assert!(report["input_hash"]
        .as_str()
        .unwrap()
        .starts_with("sha256:"));
    assert_eq!(report["config"]["potential"]["value"], 0.25);
    assert_eq!(report["config"]["seed"], 0);
    let csv = std::fs::read_to_string(out.join("livsic.csv")).unwrap();
    assert!(csv.starts_with("period,"));
}

#[test]
fn wrong_livsic_candidate_is_a_tolerance_failure() {
    let d = scratch("livsic-wrong");
    let cfg = write_config(
        &d,
        &CONSTANT.replace(r#""max_period": 5"#, r#""max_period": 5, "candidate": 0.2"#),
    );
    let out = d.join("out");
    assert_eq!(
        call(&[
            "livsic",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_TOLERANCE
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "fail");
}

#[test]
fn seed_flag_overrides_the_file_and_changes_the_hash() {
    let d = scratch("seed");
    let cfg = write_config(&d, CONSTANT);
    let hash = |seed: &str, sub: &str| {
        let out = d.join(sub);
        assert_eq!(
            call(&[
                "livsic",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                seed,
                "--out",
                out.to_str().unwrap()
            ]),
            EXIT_OK
        );
        let r: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(r["config"]["seed"].as_u64().unwrap().to_string(), seed);
        r["input_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash("1", "a"), hash("2", "b"));
}

#[test]
fn input_errors_exit_with_three() {
    let d = scratch("input");
    assert_eq!(call(&["pressure"]), EXIT_INPUT, "missing --config");
    assert_eq!(
        call(&[
            "pressure",
            "--config",
            d.join("absent.json").to_str().unwrap()
        ]),
        EXIT_INPUT
    );
    let bad = write_config(
        &d,
        r#"{"system": {"base": [[2, 1], [1, 1]]}, "unknown_field": 1}"#,
    );
    assert_eq!(
        call(&["pressure", "--config", bad.to_str().unwrap()]),
        EXIT_INPUT
    );
    let bad = write_config(&d, r#"{"system": {"base": [[1, 1], [0, 1]]}}"#);
    assert_eq!(
        call(&["pressure", "--config", bad.to_str().unwrap()]),
        EXIT_INPUT,
        "non-hyperbolic base"
    );
    assert_eq!(call(&["no-such-command"]), EXIT_INPUT);
    assert_eq!(
        call(&["livsic", "--tolerance-profile", "sloppy"]),
        EXIT_INPUT
    );
    // The sampler does not cover fiber-dependent potentials.
    let fiber = write_config(
        &d,
        r#"{"system": {"base": [[2, 1], [1, 1]], "coupling": [{"mode": [1, 0], "cos": 1.0}], "frequencies": [0.618034], "center_dim": 1},
            "potential": {"kind": "fiber_trig", "modes": [{"mode": [0, 0, 1], "cos": 0.2}]}}"#,
    );
    assert_eq!(
        call(&[
            "sample",
            "--config",
            fiber.to_str().unwrap(),
            "--out",
            d.join("o").to_str().unwrap()
        ]),
        EXIT_INPUT
    );
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(call(&["--help"]), EXIT_OK);
    assert_eq!(call(&["--version"]), EXIT_OK);
}

#[test]
fn oversized_sample_request_exceeds_the_budget() {
    let d = scratch("budget");
    let cfg = write_config(
        &d,
        r#"{"system": {"base": [[2, 1], [1, 1]]}, "sample": {"count": 1000}, "sampler": {"max_samples": 100}}"#,
    );
    assert_eq!(
        call(&[
            "sample",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            d.join("o").to_str().unwrap()
        ]),
        EXIT_BUDGET
    );
}

#[test]
fn sample_writes_points_and_is_deterministic() {
    let d = scratch("sample");
    let cfg = write_config(
        &d,
        r#"{"system": {"base": [[2, 1], [1, 1]]}, "sample": {"count": 500}}"#,
    );
    let out = d.join("o");
    let args = [
        "sample",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(call(&args), EXIT_OK);
    let first = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(first.lines().count(), 501);
    assert!(first.starts_with("x1,x2\n"));
    assert_eq!(call(&args), EXIT_OK);
    assert_eq!(
        first,
        std::fs::read_to_string(out.join("samples.csv")).unwrap()
    );
}
