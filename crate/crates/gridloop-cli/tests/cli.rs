//! End-to-end CLI tests: exit codes, the determinism contract, and the
//! shipped scenario files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gridloop() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridloop"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    gridloop().args(args).output().expect("binary runs")
}

#[test]
fn dispatch_merit_prints_cost_700() {
    let scenario = scenarios_dir().join("dispatch_merit.toml");
    let out = run(&["dispatch", "--scenario", scenario.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("total cost 700.00 $"), "stdout: {stdout}");
}

#[test]
fn run_twice_with_same_seed_is_byte_identical() {
    let scenario = scenarios_dir().join("demo.toml");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&[
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "7",
            "--quiet",
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .collect();
    names.sort();
    assert!(names.contains(&"trace.csv".to_string()));
    for name in names {
        let x = std::fs::read(a.join(&name)).unwrap();
        let y = std::fs::read(b.join(&name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn infeasible_placement_exits_one_naming_budget() {
    let scenario = scenarios_dir().join("evcs_infeasible.toml");
    let out = run(&["evcs", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "infeasibility exit code");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("Budget"),
        "stderr names the constraint: {stderr}"
    );
}

#[test]
fn config_error_exits_two_without_partial_files() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(
        &bad,
        "[scenario]\nhorizon_s = 10.0\n[loops.dispatch]\ndemand_mw = [1.0]\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "run",
        "--scenario",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "config error exit code");
    assert!(!out_dir.exists(), "no partial output files on config error");
}

#[test]
fn unknown_subcommand_exits_two() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.to_lowercase().contains("usage"),
        "usage text shown: {stderr}"
    );
}

#[test]
fn missing_family_section_exits_two() {
    let scenario = scenarios_dir().join("dispatch_merit.toml");
    let out = run(&["bes", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("[loops.bes]"), "{stderr}");
}

#[test]
fn parallel_batch_runs_every_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("batch");
    let dispatch = scenarios_dir().join("dispatch_merit.toml");
    let microgrid = scenarios_dir().join("microgrid_islanding.toml");
    let out = run(&[
        "run",
        "--scenario",
        dispatch.to_str().unwrap(),
        "--scenario",
        microgrid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("dispatch_merit/trace.csv").exists());
    assert!(out_dir.join("microgrid_islanding/trace.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("dispatch_merit"));
    assert!(stdout.contains("microgrid_islanding"));
}

/// Every shipped scenario file runs end to end.
#[test]
fn shipped_scenarios_all_run() {
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let out = run(&["run", "--scenario", path.to_str().unwrap(), "--quiet"]);
        let expected = if name == "evcs_infeasible.toml" {
            Some(1)
        } else {
            Some(0)
        };
        assert_eq!(
            out.status.code(),
            expected,
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
