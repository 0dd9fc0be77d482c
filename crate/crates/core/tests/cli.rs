use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sqsem::cli::{simulate_spectra, summarize};
use sqsem::config::ExperimentConfig;
use sqsem::quantum::{opa_output_power, Branch, OpaConfig};

const SHORT_RUN: &str =
    "seed = 5\n[pulse_train]\nduration_s = 0.01\n[spectral]\nrbw_hz = 1.0e4\naverages = 50\n";

fn sqsem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqsem"))
        .arg("--quiet")
        .args(args)
        .env_remove("SQSEM_CONFIG")
        .env_remove("SQSEM_OUT")
        .env_remove("SQSEM_SEED")
        .env_remove("SQSEM_SWEEP")
        .env_remove("SQSEM_MODE")
        .output()
        .expect("failed to run sqsem")
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn predict_writes_sweep_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqsem(&[
        "--out",
        s(dir.path()),
        "predict",
        "--sweep",
        "fano=0.5:1.0:6",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("predict.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("fano,"));
    assert_eq!(lines.count(), 6);
    let resolved = std::fs::read_to_string(dir.path().join("resolved_config.toml")).unwrap();
    let cfg = ExperimentConfig::from_toml(&resolved, "resolved_config.toml").unwrap();
    assert_eq!(cfg, {
        let mut d = ExperimentConfig::default();
        d.output.dir = dir.path().to_path_buf();
        d
    });
}

#[test]
fn invalid_sweep_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    for sweep in ["fano=1:0.5", "colour=0:1:3", "fano=0.5:1.0:1", "fano=a:b:3"] {
        let out = sqsem(&["--out", s(dir.path()), "predict", "--sweep", sweep]);
        assert_eq!(out.status.code(), Some(1), "sweep {sweep}");
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[sem]\ngain = 2\n");
    let out = sqsem(&["--config", s(&cfg), "--out", s(dir.path()), "predict"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqsem(&[
        "--config",
        s(&dir.path().join("absent.toml")),
        "--out",
        s(dir.path()),
        "predict",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "empty.csv", "");
    let out = sqsem(&["--out", s(dir.path()), "fit", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_pump_value_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "one.csv",
        "pump,amp,deamp\n0.5,2.0,0.5\n0.5,2.1,0.49\n0.5,1.9,0.51\n",
    );
    let out = sqsem(&["--out", s(dir.path()), "fit", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("distinct"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn noiseless_amplification_fit_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let opa = OpaConfig::new(1.3, 0.58, 1.0, 1.0).unwrap();
    let mut csv = String::from("pump,amp,deamp\n");
    for i in 0..12 {
        let p = 0.1 * i as f64;
        let a = opa_output_power(1.0, p, &opa, Branch::Amplify);
        let d = opa_output_power(1.0, p, &opa, Branch::Deamplify);
        csv.push_str(&format!("{p},{a:e},{d:e}\n"));
    }
    let data = write(dir.path(), "gain.csv", &csv);
    let out = sqsem(&[
        "--out",
        s(dir.path()),
        "fit",
        s(&data),
        "--mode",
        "amplification",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let report: toml::Table = std::fs::read_to_string(dir.path().join("fit_report.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(report["converged"].as_bool(), Some(true));
    let chi = report["params"]["chi"].as_float().unwrap();
    let beta = report["params"]["beta"].as_float().unwrap();
    assert!((chi - 0.58).abs() < 1e-6, "chi = {chi}");
    assert!((beta - 1.3).abs() < 1e-6, "beta = {beta}");

    let curve = std::fs::read_to_string(dir.path().join("fit_curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("pump_power,gain_amp,gain_deamp"));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", "[fit]\nmax_iterations = 1\n");
    let mut csv = String::from("pump,amp,deamp\n");
    let opa = OpaConfig::new(3.0, 0.2, 1.0, 1.0).unwrap();
    for i in 0..8 {
        let p = 0.2 * i as f64;
        let a = opa_output_power(1.0, p, &opa, Branch::Amplify);
        let d = opa_output_power(1.0, p, &opa, Branch::Deamplify);
        csv.push_str(&format!("{p},{a:e},{d:e}\n"));
    }
    let data = write(dir.path(), "gain.csv", &csv);
    let out = sqsem(&["--config", s(&cfg), "--out", s(dir.path()), "fit", s(&data)]);
    assert_eq!(out.status.code(), Some(2));
    // The partial result is still written for inspection.
    assert!(dir.path().join("fit_report.toml").exists());
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.toml", SHORT_RUN);
    let run = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        let out = sqsem(&[
            "--config",
            s(&cfg),
            "--out",
            s(&out_dir),
            "--seed",
            seed,
            "simulate",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(out_dir.join("psd_squeezed_sem.csv")).unwrap()
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
    for name in [
        "fig5.csv",
        "summary.toml",
        "resolved_config.toml",
        "traces/squeezed.bin",
    ] {
        assert!(dir.path().join("a").join(name).exists(), "missing {name}");
    }
}

#[test]
fn unit_gain_shows_no_modulation_peak() {
    let mut cfg = ExperimentConfig::from_toml(SHORT_RUN, "short run").unwrap();
    cfg.sem.g0 = 1.0;
    let (spectra, clipped) = simulate_spectra(&cfg, None).unwrap();
    let summary = summarize(&cfg, &spectra, clipped).unwrap();
    for peak in [&summary.squeezed, &summary.coherent] {
        assert_eq!(peak.analytic_power, 0.0);
        assert!(
            peak.estimated_power.abs() < 3.0 * peak.power_std_error,
            "{} +/- {}",
            peak.estimated_power,
            peak.power_std_error
        );
    }
}
