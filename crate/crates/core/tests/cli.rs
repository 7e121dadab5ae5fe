use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pstiming(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pstiming"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn constants_json() {
    let out = pstiming(&["constants"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in [
        "gamma_per_ps",
        "lifetime_ps",
        "sigma_doppler_kev",
        "c_mm_per_ps",
        "hbar_kev_ps",
    ] {
        assert!(v[key].is_f64(), "{key}");
    }
    let tau = v["lifetime_ps"].as_f64().unwrap();
    assert!((123.5..=125.5).contains(&tau));
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    let spectrum = dir.path().join("spectrum.csv");
    let fit = dir.path().join("fit.json");

    let out = pstiming(&[
        "simulate",
        "--events",
        "200000",
        "--seed",
        "42",
        "--model",
        "quantum",
        "--out",
        arg(&records),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&records).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "event_id,t0_ps,tau1_ps,tau2_ps,t1_ps,t2_ps,dtau_ps,dt_ps,omega1_kev,omega2_kev,acol_mrad,detected"
    );
    assert_eq!(text.lines().count(), 200_001);
    let echo: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("records.csv.config.json")).unwrap()).unwrap();
    assert_eq!(echo["config"]["run"]["seed"], 42);
    assert_eq!(echo["command"], "simulate");

    let out = pstiming(&[
        "analyze",
        "--in",
        arg(&records),
        "--column",
        "dtau_ps",
        "--bin-width",
        "2",
        "--fit",
        "all",
        "--out-spectrum",
        arg(&spectrum),
        "--out-fit",
        arg(&fit),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fits: Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    let fits = fits.as_array().unwrap();
    assert_eq!(fits.len(), 3);
    for key in ["model", "location_ps", "scale_ps", "fwhm_ps", "loglik", "ks", "n"] {
        assert!(!fits[0][key].is_null(), "{key}");
    }
    assert_eq!(fits[0]["model"], "double_exponential");
    let scale = fits[0]["scale_ps"].as_f64().unwrap();
    assert!((scale / 124.494 - 1.0).abs() < 0.02, "{scale}");
    assert!(dir.path().join("fit.json.config.json").exists());
    assert!(dir.path().join("spectrum.csv.config.json").exists());

    // spectrum files are accepted as input too
    let out = pstiming(&["analyze", "--in", arg(&spectrum), "--fit", "double_exponential"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let single: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let binned_scale = single["scale_ps"].as_f64().unwrap();
    assert!((binned_scale / scale - 1.0).abs() < 0.02);
}

#[test]
fn same_arguments_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let run = |p: &Path, workers: &str| {
        let out = pstiming(&[
            "simulate",
            "--events",
            "5000",
            "--seed",
            "7",
            "--workers",
            workers,
            "--out",
            arg(p),
        ]);
        assert!(out.status.success());
    };
    run(&a, "1");
    run(&b, "3");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[run]\nevents = 50\nmodel = \"semiclassical\"\n[source]\nslab_thickness_mm = 0.0\ntransverse_extent_mm = 0.0\n").unwrap();
    let out = pstiming(&["simulate", "--config", arg(&cfg)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 51);
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let out = pstiming(&["simulate", "--config", arg(&example), "--events", "10"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn validation_errors_exit_one() {
    let out = pstiming(&["simulate", "--events", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n_events"));

    let out = pstiming(&["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--bogus"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\nevents = \"many\"\n").unwrap();
    let out = pstiming(&["simulate", "--config", arg(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("configuration error"));

    let out = pstiming(&["simulate", "--events", "10", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("i/o error on /nonexistent-dir/x.csv"));

    let out = pstiming(&["pdf", "--dist", "voigt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown distribution"));
}

#[test]
fn pdf_tables() {
    let out = pstiming(&[
        "pdf",
        "--dist",
        "coincidence",
        "--from",
        "-100",
        "--to",
        "100",
        "--points",
        "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,density");
    assert_eq!(lines.len(), 4);
    let peak: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((peak - 0.004_016_25).abs() < 1e-8);

    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("models.csv");
    let out = pstiming(&[
        "pdf",
        "--dist",
        "models",
        "--gamma",
        "1",
        "--from",
        "-5",
        "--to",
        "5",
        "--out",
        arg(&table),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("x,double_exponential,lorentzian,gaussian\n"));
    assert_eq!(text.lines().count(), 2002);
    assert!(dir.path().join("models.csv.config.json").exists());

    for dist in ["doppler", "relative_density", "pal", "lorentzian_line", "gaussian"] {
        let out = pstiming(&["pdf", "--dist", dist, "--points", "11"]);
        assert!(out.status.success(), "{dist}: {}", stderr(&out));
        assert_eq!(stdout(&out).lines().count(), 12);
    }
}

#[test]
fn verify_passes() {
    let out = pstiming(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let reports: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let reports = reports.as_array().unwrap();
    assert!(reports.len() >= 4);
    assert!(reports.iter().all(|r| r["passed"] == true));
    for id in ["I1", "I2", "I3", "NORM"] {
        assert!(reports.iter().any(|r| r["id"] == id), "{id}");
    }
}
