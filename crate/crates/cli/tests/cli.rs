use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn idde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idde"))
        .args(args)
        .env_remove("IDDE_SEED_GRID")
        .output()
        .expect("binary runs")
}

fn bundled(id: &str, dir: &Path) -> String {
    let out = idde(&["cases", "--show", id]);
    assert!(out.status.success());
    let path = dir.join(format!("{id}.json"));
    fs::write(&path, out.stdout).unwrap();
    path.display().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn simulate_writes_csv_and_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("impulsive-linear", dir.path());
    let csv = path(dir.path(), "x.csv");
    let out = idde(&["simulate", "--config", &cfg, "--t-end", "3", "--step", "0.01", "--out", &csv]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = fs::read(&csv).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.starts_with("t,value,side\n"));
    assert!(text.contains(",left\n") && text.contains(",right\n"));

    let manifest = path(dir.path(), "x.manifest.json");
    let replay_dir = dir.path().join("again");
    let out = idde(&["replay", &manifest, "--out-dir", &replay_dir.display().to_string()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(replay_dir.join("x.csv")).unwrap(), first);
}

#[test]
fn check_reports_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("boundary-alpha-below", dir.path());
    let report = path(dir.path(), "report.json");
    let out = idde(&["check", "--config", &cfg, "--report", &report]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    for id in ["H1", "H2", "H3i", "H5", "SIGMA_YAN", "COR2_2"] {
        assert!(ids.contains(&id), "{id} missing from {ids:?}");
    }
    let h5 = v.as_array().unwrap().iter().find(|r| r["id"] == "H5").unwrap();
    assert_eq!(h5["verdict"], "pass");
    assert!((h5["values"]["alpha1_alpha2"].as_f64().unwrap() - 0.9801).abs() < 1e-9);
}

#[test]
fn periodic_solution_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("liu-takeuchi", dir.path());
    let stem = path(dir.path(), "nstar");
    let out = idde(&["find-periodic", "--config", &cfg, "--out", &stem]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let nstar = format!("{stem}.json");
    assert!(Path::new(&format!("{stem}.csv")).exists());

    let report = path(dir.path(), "verify.json");
    let out = idde(&[
        "verify", "--config", &cfg, "--nstar", &nstar, "--scales", "0.5,2", "--horizon", "60", "--report", &report,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["attracting"], true);
    let rows = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(rows.starts_with("scale,period,e_m\n"));

    let checked = path(dir.path(), "check.json");
    let out = idde(&["check", "--config", &cfg, "--periodic-solution", &nstar, "--report", &checked]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&checked).unwrap()).unwrap();
    let thm = v.as_array().unwrap().iter().find(|r| r["id"] == "THM3_4").unwrap();
    assert_eq!(thm["verdict"], "pass");
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"omega": -1.0}"#).unwrap();
    let out = idde(&["simulate", "--config", &bad.display().to_string(), "--t-end", "1", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = bundled("boundary-alpha-below", dir.path());
    let out = idde(&["find-periodic", "--config", &cfg, "--out", &path(dir.path(), "n")]);
    assert_eq!(out.status.code(), Some(2), "population subcommand on a general scenario");
}

#[test]
fn reproduce_boundary_case_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().display().to_string();
    let out = idde(&["reproduce", "boundary-alpha", "--out-dir", &out_dir]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    for f in ["manifest.json", "summary.json", "boundary-alpha-below/report.json", "boundary-alpha-above/zero.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
