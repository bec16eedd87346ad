//! The `fracwave` binary end to end: exit codes, files and messages.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fracwave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracwave"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn base(kind: &str, n: usize, t_end: f64) -> Value {
    json!({
        "model": {"kind": kind, "nu": 1.0},
        "grid": {"N": n},
        "initial": {"kind": "mode", "k": 1, "amplitude": 1e-6},
        "solver": {"t_end": t_end},
        "output": {"directory": "out"}
    })
}

fn last_snapshot(dir: &Path) -> Vec<u8> {
    let mut files: Vec<_> = fs::read_dir(dir.join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    fs::read(files.last().unwrap()).unwrap()
}

#[test]
fn zero_data_stays_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base("fch", 32, 1.0);
    cfg["initial"] = json!({"kind": "zero"});
    cfg["solver"]["snapshot_every"] = json!(0.25);
    write_config(tmp.path(), "c.json", &cfg);
    let o = fracwave(tmp.path(), &["run", "--config", "c.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = read_json(&tmp.path().join("out/manifest.json"));
    assert_eq!(manifest["outcome"], "completed");
    let snaps = manifest["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 5);
    for s in snaps {
        let text = fs::read_to_string(tmp.path().join("out").join(s["file"].as_str().unwrap())).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,u"));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 32);
        for r in rows {
            let u: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(u, 0.0);
        }
    }
}

#[test]
fn small_mode_travels_at_seven_ninths() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base("fch", 64, 2.0);
    cfg["solver"]["dt"] = json!(1e-3);
    cfg["solver"]["snapshot_every"] = json!(0.1);
    write_config(tmp.path(), "c.json", &cfg);
    let o = fracwave(tmp.path(), &["run", "--config", "c.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_json(&tmp.path().join("out/manifest.json"));
    let speed = m["measured_phase_speed"]["speed"].as_f64().unwrap();
    assert!((speed - 7.0 / 9.0).abs() < 1e-6, "{speed}");
    assert!(m["drift"]["mass"].as_f64().unwrap() < 1e-10);
}

#[test]
fn steep_run_exits_with_breaking() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base("fch", 256, 3.0);
    cfg["initial"] = json!({"kind": "mode", "k": 1, "amplitude": 2.0, "phase": -std::f64::consts::FRAC_PI_2});
    cfg["solver"]["breaking_slope_threshold"] = json!(10.0);
    write_config(tmp.path(), "c.json", &cfg);
    let o = fracwave(tmp.path(), &["run", "--config", "c.json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let m = read_json(&tmp.path().join("out/manifest.json"));
    assert_eq!(m["outcome"], "breaking");
    let report = &m["breaking_report"];
    assert!(report["min_slope"].as_f64().unwrap() <= -10.0);
    assert!(report["tail_fraction"].as_f64().unwrap() > 1e-4);
    assert!(m["blow_up"].is_null());
    // a checkpoint of the last good state is still written
    assert!(tmp.path().join("out/checkpoint.fwck").exists());
}

#[test]
fn nu_sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "c.json", &base("fbbm", 32, 0.5));
    let o = fracwave(
        tmp.path(),
        &["sweep", "--config", "c.json", "--axis", "nu", "--values", "1,1.5,2,1.5", "--jobs", "2"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("repeated nu value 1.5"));
    for v in ["1", "1.5", "2"] {
        let m = read_json(&tmp.path().join(format!("out/sweep/nu={v}/manifest.json")));
        assert_eq!(m["outcome"], "completed");
        assert_eq!(m["config"]["model"]["nu"].as_f64().unwrap(), v.parse::<f64>().unwrap());
    }
    let summary = read_json(&tmp.path().join("out/sweep/summary.json"));
    assert_eq!(summary["points"].as_array().unwrap().len(), 3);
    // coarse grid and CFL step: only the RK4 amplitude error of a linear wave
    assert!(summary["points"][0]["drift"]["fbbm_energy"].as_f64().unwrap() < 1e-6);
}

#[test]
fn amplitude_sweep_and_empty_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "c.json", &base("fkdv", 32, 0.2));
    let o = fracwave(tmp.path(), &["sweep", "--config", "c.json", "--axis", "amplitude", "--values", "0.1,0.2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("out/sweep/amplitude=0.2/manifest.json").exists());

    let o = fracwave(tmp.path(), &["sweep", "--config", "c.json", "--axis", "nu", "--values"]);
    assert_eq!(code(&o), 1);
    let o = fracwave(tmp.path(), &["sweep", "--config", "c.json", "--axis", "nu"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unknown_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base("fch", 32, 0.1);
    cfg["solver"]["tend"] = json!(1.0);
    write_config(tmp.path(), "c.json", &cfg);
    let o = fracwave(tmp.path(), &["run", "--config", "c.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("tend"), "{}", stderr(&o));

    write_config(tmp.path(), "ok.json", &base("fch", 32, 0.1));
    let o = fracwave(tmp.path(), &["run", "--config", "ok.json", "--set", "grid.M=3"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("grid.M"), "{}", stderr(&o));
}

#[test]
fn low_nu_needs_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "c.json", &base("fbbm", 32, 0.1));
    let o = fracwave(tmp.path(), &["run", "--config", "c.json", "--set", "model.nu=0.75"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--allow-low-nu"));
    let o = fracwave(tmp.path(), &["run", "--allow-low-nu", "--config", "c.json", "--set", "model.nu=0.75"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn ifrk4_is_refused_outside_fkdv() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "c.json", &base("fch", 32, 0.1));
    let o = fracwave(tmp.path(), &["run", "--config", "c.json", "--set", "solver.integrator=ifrk4"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("ifrk4"), "{}", stderr(&o));
}

#[test]
fn commutator_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fracwave(tmp.path(), &["diagnose", "commutator", "--set", "s=0.2", "--set", "sigma=1.2"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("3/2 < s + m"), "{}", stderr(&o));

    let o = fracwave(tmp.path(), &["diagnose", "commutator", "--set", "sampling.samples=50"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&tmp.path().join("commutator_report.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["params"]["sampling"]["samples"], 50);
}

#[test]
fn constant_perturbation_has_unit_growth() {
    // constants are steady states, so a constant offset of the zero state never grows
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "initial": {"kind": "zero"},
        "perturbation": {"kind": "constant"},
        "deltas": [1e-3],
        "pairs": 2,
        "solver": {"t_end": 0.5}
    });
    write_config(tmp.path(), "d.json", &cfg);
    let o = fracwave(tmp.path(), &["diagnose", "dependence", "--config", "d.json", "--output", "dep.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&tmp.path().join("dep.json"));
    for g in r["result"]["per_delta"][0]["growth"].as_array().unwrap() {
        assert!((g.as_f64().unwrap() - 1.0).abs() < 1e-9, "{g}");
    }
}

#[test]
fn resume_at_time_zero_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base("fch", 64, 0.0);
    cfg["initial"]["amplitude"] = json!(0.3);
    cfg["solver"]["dt"] = json!(0.01);
    write_config(tmp.path(), "zero.json", &cfg);
    assert_eq!(code(&fracwave(tmp.path(), &["run", "--config", "zero.json"])), 0);
    fs::rename(tmp.path().join("out/checkpoint.fwck"), tmp.path().join("t0.fwck")).unwrap();

    cfg["solver"]["t_end"] = json!(0.5);
    write_config(tmp.path(), "c.json", &cfg);
    assert_eq!(code(&fracwave(tmp.path(), &["run", "--config", "c.json", "--set", "output.directory=\"a\""])), 0);
    let o = fracwave(
        tmp.path(),
        &["resume", "--checkpoint", "t0.fwck", "--config", "c.json", "--set", "output.directory=\"b\""],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(last_snapshot(&tmp.path().join("a")), last_snapshot(&tmp.path().join("b")));
    assert_eq!(read_json(&tmp.path().join("b/manifest.json"))["command"], "resume");
}

#[test]
fn split_run_matches_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base("fch", 64, 1.0);
    cfg["initial"]["amplitude"] = json!(0.5);
    cfg["solver"]["dt"] = json!(0.01);
    write_config(tmp.path(), "c.json", &cfg);
    assert_eq!(code(&fracwave(tmp.path(), &["run", "--config", "c.json", "--set", "output.directory=straight"])), 0);
    assert_eq!(
        code(&fracwave(
            tmp.path(),
            &["run", "--config", "c.json", "--set", "output.directory=half", "--set", "solver.t_end=0.5"],
        )),
        0
    );
    let o = fracwave(
        tmp.path(),
        &["resume", "--checkpoint", "half/checkpoint.fwck", "--config", "c.json", "--set", "output.directory=rest"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(last_snapshot(&tmp.path().join("straight")), last_snapshot(&tmp.path().join("rest")));
    assert_eq!(
        fs::read(tmp.path().join("straight/checkpoint.fwck")).unwrap(),
        fs::read(tmp.path().join("rest/checkpoint.fwck")).unwrap()
    );
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "c.json", &base("fch", 32, 0.1));
    assert_eq!(code(&fracwave(tmp.path(), &["run", "--config", "c.json"])), 0);
    let path = tmp.path().join("out/checkpoint.fwck");
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(tmp.path().join("bad.fwck"), &bytes).unwrap();
    let o = fracwave(
        tmp.path(),
        &["resume", "--checkpoint", "bad.fwck", "--config", "c.json", "--set", "output.directory=r"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).to_lowercase().contains("checksum"), "{}", stderr(&o));
    assert_eq!(read_json(&tmp.path().join("r/manifest.json"))["outcome"], "error");

    fs::write(tmp.path().join("short.fwck"), &bytes[..10]).unwrap();
    let o = fracwave(tmp.path(), &["resume", "--checkpoint", "short.fwck", "--config", "c.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn manifest_can_be_turned_off() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base("fkdv", 32, 0.1);
    cfg["output"]["manifest"] = json!(false);
    write_config(tmp.path(), "c.json", &cfg);
    assert_eq!(code(&fracwave(tmp.path(), &["run", "--config", "c.json"])), 0);
    assert!(!tmp.path().join("out/manifest.json").exists());
    assert!(tmp.path().join("out/snapshots/u_00000.csv").exists());
}
