//! End-to-end runs of the binary: fixture verification, a
//! simulate-then-analyze pipeline with byte-level reproducibility, and the
//! failure modes the exit codes promise.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

const TWO_PI: f64 = std::f64::consts::TAU;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cascade-lab"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning the binary");
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn verify_fixture_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(bin().args(["verify", "--output"]).arg(dir.path()));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("0 failed"), "unexpected verify output:\n{stdout}");
    let report = fs::read_to_string(dir.path().join("verify.json")).unwrap();
    assert!(report.contains("cover-lattice"));
    assert!(report.contains("identity-composite"));
}

fn write_config(path: &Path, value: &serde_json::Value) {
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn simulate_config(out: &Path) -> serde_json::Value {
    json!({
        "command": "simulate",
        "output": out,
        "snapshot_stride": 2,
        "solver": {
            "grid": { "n": 16, "l": TWO_PI },
            "params": {
                "nu": 0.05, "eta": 0.05,
                "r0": TWO_PI / 4.0, "t_horizon": 0.1,
                "re": 20.0, "rm": 20.0, "m": 1.0
            },
            "dt": 0.01,
            "t_end": 0.1,
            "init_u": { "kind": "orszag_tang" },
            "init_b": { "kind": "orszag_tang_b" }
        }
    })
}

fn analyze_config(out: &Path, series: &Path) -> serde_json::Value {
    json!({
        "command": "analyze",
        "output": out,
        "seed": 7,
        "series": series,
        "analysis": {
            "scales": [TWO_PI / 4.0, TWO_PI / 8.0],
            "covers_per_scale": 2,
            "statements": ["total_energy", "fluid_energy"]
        }
    })
}

#[test]
fn analyze_pipeline_reproduces_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let sim_out = dir.path().join("sim");
    let sim_cfg = dir.path().join("simulate.json");
    write_config(&sim_cfg, &simulate_config(&sim_out));
    run_ok(bin().args(["simulate", "--config"]).arg(&sim_cfg));
    assert!(sim_out.join("stats.json").exists());
    assert!(sim_out.join("manifest.json").exists());

    let series = sim_out.join("series");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let cfg_a = dir.path().join("analyze_a.json");
    let cfg_b = dir.path().join("analyze_b.json");
    write_config(&cfg_a, &analyze_config(&out_a, &series));
    write_config(&cfg_b, &analyze_config(&out_b, &series));
    run_ok(bin().args(["analyze", "--config"]).arg(&cfg_a));
    run_ok(bin().args(["analyze", "--config"]).arg(&cfg_b));

    for name in ["verdicts.jsonl", "verdicts.csv", "locality.jsonl"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert!(!a.is_empty(), "{name} is empty");
    }

    // A rerun into the same directory appends to the analysis log and
    // leaves the manifest and the rewritten CSV unchanged.
    let manifest = fs::read(out_a.join("manifest.json")).unwrap();
    let log = fs::read_to_string(out_a.join("verdicts.jsonl")).unwrap();
    let csv = fs::read(out_a.join("verdicts.csv")).unwrap();
    run_ok(bin().args(["analyze", "--config"]).arg(&cfg_a));
    assert_eq!(manifest, fs::read(out_a.join("manifest.json")).unwrap());
    assert_eq!(csv, fs::read(out_a.join("verdicts.csv")).unwrap());
    let doubled = fs::read_to_string(out_a.join("verdicts.jsonl")).unwrap();
    assert_eq!(doubled, format!("{log}{log}"));

    // The report command rebuilds summaries from the log alone.
    run_ok(bin().args(["report", "--output"]).arg(&out_b));
    let summary = fs::read_to_string(out_b.join("summary.json")).unwrap();
    assert!(summary.contains("total_energy"));
    assert!(summary.contains("\"label\": \"u+p\""));
    assert!(out_b.join("plots").join("000_total_energy.csv").exists());
    assert!(out_b.join("plots").join("001_fluid_energy.csv").exists());
}

#[test]
fn malformed_config_is_rejected_with_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write_config(
        &cfg,
        &json!({
            "command": "analyze",
            "output": dir.path().join("out"),
            "series": dir.path().join("series"),
            "analysis": { "k1": "eight" }
        }),
    );
    let out = bin().args(["analyze", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("analysis.k1"), "stderr does not name the key:\n{stderr}");
}

#[test]
fn unknown_config_fields_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    write_config(
        &cfg,
        &json!({
            "command": "analyze",
            "output": dir.path().join("out"),
            "series": dir.path().join("series"),
            "analysis": { "covers_per_scal": 3 }
        }),
    );
    let out = bin().args(["analyze", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("covers_per_scal"), "stderr does not name the field:\n{stderr}");
}

#[test]
fn cfl_violation_aborts_simulate_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let sim_out = dir.path().join("sim");
    let mut cfg = simulate_config(&sim_out);
    cfg["solver"]["dt"] = json!(0.5);
    cfg["solver"]["t_end"] = json!(1.0);
    let path = dir.path().join("coarse.json");
    write_config(&path, &cfg);
    let out = bin().args(["simulate", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success(), "a CFL-violating run must not exit 0");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("CFL"), "stderr lacks the CFL diagnostic:\n{stderr}");
}

#[test]
fn config_command_must_match_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let sim_out = dir.path().join("sim");
    let path = dir.path().join("simulate.json");
    write_config(&path, &simulate_config(&sim_out));
    let out = bin().args(["analyze", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("declares command simulate"), "stderr:\n{stderr}");
}
