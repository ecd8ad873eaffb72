//! End-to-end tests against the built binary and the shipped configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn tandem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tandem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn predict_qm_baseline_reports_two_thirds() {
    let out = tandem(&[
        "predict",
        "--config",
        config("qm_baseline.toml").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("E_sigma = 0.666666667"), "{text}");
    assert!(text.contains("validity: ok"), "{text}");
}

#[test]
fn predict_ms_t2_motion_zeroes_e_sigma() {
    let out = tandem(&[
        "predict",
        "--config",
        config("ms_t2_motion.toml").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("E_sigma = 0.000000000"), "{text}");
}

#[test]
fn predict_surfaces_invalid_tables_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = tandem(&[
        "predict",
        "--config",
        config("ms_t2_zero_phases.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("validity: INVALID"), "{text}");
    assert!(text.contains("joint(+1,-1) = -0.015625"), "{text}");
    // The bundle is still written for inspection.
    let json = std::fs::read_to_string(dir.path().join("prediction.json")).unwrap();
    assert!(json.contains("\"valid\": false"));
}

#[test]
fn predict_theory_override_wins() {
    let out = tandem(&[
        "predict",
        "--config",
        config("ms_t2_motion.toml").to_str().unwrap(),
        "--theory",
        "qm",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("QM at"));
}

#[test]
fn classify_the_three_canonical_geometries() {
    for (file, expected) in [
        ("timing_t1.toml", "(b11, a21 a22)"),
        ("ms_t2_motion.toml", "(b11, b21 a22)"),
        ("ms_t3_rest.toml", "(a11[21], b21 a22)"),
    ] {
        let out = tandem(&["classify", "--config", config(file).to_str().unwrap()]);
        assert!(out.status.success(), "{file}: {}", stderr(&out));
        let text = stdout(&out);
        assert!(
            text.contains(&format!("canonical timing: {expected}")),
            "{file}: {text}"
        );
    }
}

#[test]
fn classify_reports_mixed_geometries() {
    let out = tandem(&[
        "classify",
        "--config",
        config("classify_mixed.toml").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("MIXED"), "{}", stdout(&out));
}

#[test]
fn simulate_writes_deterministic_artifacts() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = tandem(&[
            "simulate",
            "--config",
            config("qm_baseline.toml").to_str().unwrap(),
            "--trials",
            "20000",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        for file in ["events.csv", "spectrum.csv", "estimates.json"] {
            assert!(dir.path().join(file).exists(), "missing {file}");
        }
    }
    // Identical config and seed give byte-identical machine outputs.
    for file in ["events.csv", "spectrum.csv", "estimates.json"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} must be byte-identical across reruns");
    }

    let events = std::fs::read(dir_a.path().join("events.csv")).unwrap();
    let header = String::from_utf8_lossy(&events);
    assert!(header.starts_with("trial,path,subensemble,sigma,omega,t1_s,t2_s\n"));
}

#[test]
fn simulate_seed_changes_the_stream() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&dir_a, "1"), (&dir_b, "2")] {
        let out = tandem(&[
            "simulate",
            "--config",
            config("qm_baseline.toml").to_str().unwrap(),
            "--trials",
            "5000",
            "--seed",
            seed,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let events_a = std::fs::read(dir_a.path().join("events.csv")).unwrap();
    let events_b = std::fs::read(dir_b.path().join("events.csv")).unwrap();
    assert_ne!(events_a, events_b);
}

#[test]
fn simulate_check_passes_for_a_healthy_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = tandem(&[
        "simulate",
        "--config",
        config("ms_t3_rest.toml").to_str().unwrap(),
        "--trials",
        "200000",
        "--out",
        dir.path().to_str().unwrap(),
        "--check",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("within 4 sigma"));
}

#[test]
fn simulate_empty_window_exits_one_but_keeps_artifacts() {
    // A window where no peak lives selects nothing; the estimates fail with
    // a config error, but the event and spectrum files survive for
    // diagnosis.
    let dir = tempfile::tempdir().unwrap();
    let misplaced = dir.path().join("misplaced.toml");
    let text = std::fs::read_to_string(config("qm_baseline.toml"))
        .unwrap()
        .replace("window_center = 0.0", "window_center = 5e-10");
    std::fs::write(&misplaced, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = tandem(&[
        "simulate",
        "--config",
        misplaced.to_str().unwrap(),
        "--trials",
        "2000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("empty selection"), "{}", stderr(&out));
    assert!(out_dir.join("events.csv").exists());
    assert!(out_dir.join("spectrum.csv").exists());
    assert!(!out_dir.join("estimates.json").exists());
}

#[test]
fn simulate_check_handles_multi_peak_windows() {
    // A window wide enough for all four peaks checks the estimates against
    // the re-normalized mixture (two interfering tables plus the flat outer
    // peaks), not the single-subensemble table.
    let dir = tempfile::tempdir().unwrap();
    let wide = dir.path().join("wide.toml");
    let text = std::fs::read_to_string(config("qm_baseline.toml"))
        .unwrap()
        .replace("window_width = 4e-10", "window_width = 1.0");
    std::fs::write(&wide, text).unwrap();
    let out = tandem(&[
        "simulate",
        "--config",
        wide.to_str().unwrap(),
        "--trials",
        "200000",
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--check",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    // Mixture prediction at zero phases: E_sigma_omega = (1/4)/(1/2) = 1/2.
    assert!(
        stdout(&out).contains("(predicted +0.500000)"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn simulate_check_fails_with_exit_three() {
    // Eleven selected events that all agree on omega: the empirical
    // standard error collapses to zero and the 4-sigma check must fail.
    // Deterministic for this seed and trial count.
    let dir = tempfile::tempdir().unwrap();
    let out = tandem(&[
        "simulate",
        "--config",
        config("qm_baseline.toml").to_str().unwrap(),
        "--trials",
        "60",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("statistical check failed"));
    // The artifacts are still written for post-mortem inspection.
    assert!(dir.path().join("events.csv").exists());
}

#[test]
fn simulate_refuses_invalid_phase_domain_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = tandem(&[
        "simulate",
        "--config",
        config("ms_t2_zero_phases.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("-0.015625"), "{err}");
    assert!(!dir.path().join("events.csv").exists());
}

#[test]
fn scan_beta_tracks_both_theories() {
    let out = tandem(&[
        "scan",
        "--config",
        config("ms_t3_rest.toml").to_str().unwrap(),
        "--parameter",
        "beta",
        "--start",
        "0",
        "--stop",
        "3.141592653589793",
        "--steps",
        "9",
        "--quantity",
        "e_sigma_omega",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "beta,qm_e_sigma_omega,ms_e_sigma_omega,ms_valid"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|line| {
            line.split(',')
                .take(3)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(rows.len(), 9);
    for row in &rows {
        assert!((row[1] - 2.0 / 3.0).abs() < 1e-12, "QM column constant");
        let expected = 2.0 / 9.0 * (1.0 + 2.0 * row[0].cos().powi(2));
        assert!(
            (row[2] - expected).abs() < 1e-12,
            "MS column tracks the curve"
        );
    }
    // Midpoint beta = pi/2 gives the minimum 2/9.
    assert!((rows[4][2] - 2.0 / 9.0).abs() < 1e-12);
}

#[test]
fn scan_gamma_e_omega_matches_between_theories() {
    // T2 stays valid for gamma in [pi/3, 2pi/3] at alpha = beta = 0.
    let out = tandem(&[
        "scan",
        "--config",
        config("ms_t2_motion.toml").to_str().unwrap(),
        "--parameter",
        "gamma",
        "--start",
        "1.0471975511965976",
        "--stop",
        "2.0943951023931953",
        "--steps",
        "7",
        "--quantity",
        "e_omega",
        "--timing",
        "t2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for line in stdout(&out).lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let qm: f64 = cells[1].parse().unwrap();
        let ms: f64 = cells[2].parse().unwrap();
        assert!((qm - ms).abs() < 1e-15, "{line}");
        assert_eq!(cells[3], "true");
    }
}

#[test]
fn scan_flags_invalid_rows_and_exits_two() {
    let out = tandem(&[
        "scan",
        "--config",
        config("ms_t2_zero_phases.toml").to_str().unwrap(),
        "--parameter",
        "beta",
        "--start",
        "0",
        "--stop",
        "3.141592653589793",
        "--steps",
        "5",
        "--quantity",
        "e_sigma",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("false"), "{}", stdout(&out));
}

#[test]
fn scan_two_steps_gives_two_rows() {
    let out = tandem(&[
        "scan",
        "--config",
        config("ms_t3_rest.toml").to_str().unwrap(),
        "--parameter",
        "beta",
        "--start",
        "0",
        "--stop",
        "1.0",
        "--steps",
        "2",
        "--quantity",
        "e_sigma",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 3); // header + 2 rows
}

#[test]
fn paradox_prints_the_partition() {
    let out = tandem(&["paradox"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("both fire      0.25"), "{text}");
    assert!(text.contains("neither fires  0.25"), "{text}");
    assert!(text.contains("exactly one    0.50"), "{text}");
}

#[test]
fn audit_passes_with_small_grid() {
    let out = tandem(&["audit", "--grid-steps", "4", "--trials", "40000"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("(phase-dependent)"), "{text}");
    assert!(text.contains("(flat)"), "{text}");
    assert!(!text.contains("VIOLATION"), "{text}");
}

#[test]
fn unknown_config_keys_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let mut text = std::fs::read_to_string(config("qm_baseline.toml")).unwrap();
    text.push_str("\n[run.extra]\nx = 1\n");
    std::fs::write(&path, text).unwrap();
    let out = tandem(&["predict", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_one() {
    let out = tandem(&["predict", "--config", "/nonexistent.toml"]);
    assert_eq!(out.status.code(), Some(1));
}
