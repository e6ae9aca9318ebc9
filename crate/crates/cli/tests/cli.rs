use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn reentry(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reentry"))
        .args(args)
        .env("REENTRY_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Two 10 s steps from the heat-reach center with a short MPC block.
fn tiny_scenario(dir: &Path) -> PathBuf {
    let text = r#"{
        "schema_version": 1,
        "name": "tiny",
        "initial_set": {"center": {"altitude_km": 71.932, "velocity": 7600,
            "flight_path_angle_deg": -0.1, "latitude": 0, "heading_deg": 90, "longitude": 0}},
        "controls": {"angle_of_attack_deg": [15, 30], "bank_angle_deg": [-60, -10]},
        "reach": {"time_step": 10, "horizon": 20, "substeps": 10},
        "thermal": {"heat_rate_limit_mw": 9},
        "mpc": {"N": 5, "Ts": 0.5, "duration": 2},
        "monte_carlo": {"samples": 20}
    }"#;
    let path = dir.join("tiny.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn help_lists_commands_and_exit_codes() {
    let o = reentry(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for word in [
        "reach",
        "mpc",
        "validate",
        "heat",
        "Exit codes",
        "REENTRY_LOG",
    ] {
        assert!(text.contains(word), "help lacks `{word}`");
    }
}

#[test]
fn schema_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let good = fs::read_to_string(tiny_scenario(dir.path())).unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        good.replace("\"velocity\": 7600", "\"velocity\": \"fast\""),
    )
    .unwrap();
    let o = reentry(&["reach", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("initial_set.center.velocity"));

    let missing = reentry(&["heat", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code(&missing), 2);

    let no_mpc = dir.path().join("no_mpc.json");
    let v: Value = serde_json::from_str(&good).unwrap();
    let mut obj = v.as_object().unwrap().clone();
    obj.remove("mpc");
    fs::write(&no_mpc, Value::Object(obj).to_string()).unwrap();
    assert_eq!(code(&reentry(&["mpc", no_mpc.to_str().unwrap()])), 2);
}

#[test]
fn reach_then_validate_and_a_shrunken_tube_fails_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny_scenario(dir.path());
    let out = dir.path().join("reach");
    let o = reentry(&[
        "reach",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "tube.csv",
        "tube.json",
        "tube_vh.svg",
        "report.json",
        "timings.json",
        "scenario.resolved.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["containment"]["violations"], 0);
    assert_eq!(report["containment"]["samples"], 20);

    let tube = out.join("tube.json");
    let again = dir.path().join("validate");
    let o = reentry(&[
        "validate",
        tube.to_str().unwrap(),
        scenario.to_str().unwrap(),
        "--samples",
        "10",
        "--seed",
        "3",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(again.join("containment.json").exists());

    // Halve every generator of the stored sets.
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&tube).unwrap()).unwrap();
    let halve = |set: &mut Value| {
        for g in set["generators"].as_array_mut().unwrap() {
            for x in g.as_array_mut().unwrap() {
                *x = Value::from(x.as_f64().unwrap() * 0.5);
            }
        }
    };
    for step in doc["steps"].as_array_mut().unwrap() {
        halve(&mut step["set"]);
    }
    let shrunk = dir.path().join("shrunk.json");
    fs::write(&shrunk, doc.to_string()).unwrap();
    let o = reentry(&[
        "validate",
        shrunk.to_str().unwrap(),
        scenario.to_str().unwrap(),
        "--samples",
        "20",
        "--out",
        dir.path().join("shrunk").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("violations"));
}

#[test]
fn reach_output_is_reproducible_from_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny_scenario(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        code(&reentry(&[
            "reach",
            scenario.to_str().unwrap(),
            "--constrained",
            "--out",
            a.to_str().unwrap()
        ])),
        0
    );
    let echo = a.join("scenario.resolved.json");
    assert_eq!(
        code(&reentry(&[
            "reach",
            echo.to_str().unwrap(),
            "--constrained",
            "--out",
            b.to_str().unwrap()
        ])),
        0
    );
    for f in [
        "tube.csv",
        "tube.json",
        "report.json",
        "scenario.resolved.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn heat_and_mpc_runs_write_their_records() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tiny_scenario(dir.path());
    let heat = dir.path().join("heat");
    let o = reentry(&[
        "heat",
        scenario.to_str().unwrap(),
        "--out",
        heat.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "heat_profile.csv",
        "heat_steps.csv",
        "heat_limit.csv",
        "heat_vh.svg",
    ] {
        assert!(heat.join(f).exists(), "{f} missing");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("surface temperature at the limit"));

    let mpc = dir.path().join("mpc");
    let o = reentry(&[
        "mpc",
        scenario.to_str().unwrap(),
        "--out",
        mpc.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(mpc.join("closed_loop.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("# schema_version=1 kind=closed_loop"));
    assert!(lines
        .next()
        .unwrap()
        .ends_with("J,Q_dot,tube_slack,solver_status"));
    // Four samples plus the final state.
    assert_eq!(lines.count(), 5);
}
