//! End-to-end runs of the psn binary: exit codes, file outputs, and the
//! determinism guarantees the interface promises.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psn_core::asymptotics::{log_self_energy, SweepRecord};
use psn_core::groundstate::solve_radial_ground_state;
use psn_core::io::write_sweep_csv;

fn psn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const LINEAR_CONFIG: &str = r#"{
  "grid": { "n": 64, "half_width": 8.0 },
  "potential": { "kind": "harmonic", "lambda": 2.0, "omega": 0.0 },
  "solver": { "interactions": { "log_coeff": 0.0, "quartic_coeff": 0.0 } }
}"#;

#[test]
fn ground_state_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = psn(&["ground-state", "--out", "q.csv"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("q.csv")).unwrap();
    assert!(csv.starts_with("r,q,dq\n"));
    assert!(csv.lines().count() > 10_000);

    let summary = json_file(&dir.path().join("q.json"));
    assert!((summary["a_star"].as_f64().unwrap() - 11.700896524560).abs() < 1e-6);
    assert!((summary["q0"].as_f64().unwrap() - 2.206200864650).abs() < 1e-6);
    assert!(summary["gradient_identity_residual"].as_f64().unwrap().abs() < 1e-6);
    assert!(summary["quartic_identity_residual"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();

    let out = psn(&["minimize", "--config", "missing.json", "--a", "1.0", "--out", "u.psn1"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    write_config(dir.path(), "cfg.json", LINEAR_CONFIG);
    let out = psn(&["minimize", "--config", "cfg.json", "--a", "-3.0", "--out", "u.psn1"], dir.path());
    assert_eq!(code(&out), 2);

    let out = psn(&["fit", "--in", "absent.csv"], dir.path());
    assert_eq!(code(&out), 2);

    // config rejects unknown keys instead of silently ignoring them
    write_config(dir.path(), "typo.json", r#"{
      "grid": { "n": 64, "half_width": 8.0 },
      "potential": { "kind": "harmonic", "lambda": 2.0, "omega": 0.0 },
      "solver": { "residual_tol": 1e-6, "maxiters": 10 }
    }"#);
    let out = psn(&["minimize", "--config", "typo.json", "--a", "1.0", "--out", "u.psn1"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("maxiters"));
}

#[test]
fn supercritical_rotation_is_gated() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "fast.json", r#"{
      "grid": { "n": 64, "half_width": 8.0 },
      "potential": { "kind": "harmonic", "lambda": 2.0, "omega": 2.0 }
    }"#);
    let out = psn(&["minimize", "--config", "fast.json", "--a", "1.0", "--out", "u.psn1"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("critical velocity"));
    assert!(!dir.path().join("u.psn1").exists());
}

#[test]
fn minimize_then_energy_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "cfg.json", LINEAR_CONFIG);

    let out = psn(&["minimize", "--config", "cfg.json", "--a", "2.0", "--out", "state.psn1"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // lambda = 2 trap without interactions: e(a) = 2a exactly in the limit
    let report = json_file(&dir.path().join("state.json"));
    assert_eq!(report["outcome"], "converged");
    let e_a = report["e_a"].as_f64().unwrap();
    assert!((e_a - 4.0).abs() < 1e-3, "e_a = {e_a}");
    assert!((report["mu_a"].as_f64().unwrap() - 2.0).abs() < 1e-3);

    let out = psn(
        &["energy", "--in", "state.psn1", "--config", "cfg.json", "--out", "energy.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let energy = json_file(&dir.path().join("energy.json"));
    assert!((energy["mass"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    let total = energy["breakdown"]["total"].as_f64().unwrap();
    assert!((total - e_a).abs() < 1e-9, "stored state re-evaluates to {total}, report said {e_a}");
    assert!(energy["el_residual"].as_f64().unwrap() < 1e-5);
}

#[test]
fn sweep_is_deterministic_and_jobs_invariant() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "sweep.json", r#"{
      "grid": { "n": 64, "half_width": 8.0 },
      "potential": { "kind": "harmonic", "lambda": 2.0, "omega": 0.5 },
      "sweep": { "a_fractions": [0.3, 0.5] }
    }"#);

    for (file, jobs) in [("s1.csv", "1"), ("s2.csv", "1"), ("s3.csv", "2")] {
        let out = psn(
            &["sweep", "--config", "sweep.json", "--out", file, "--jobs", jobs],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let b1 = std::fs::read(dir.path().join("s1.csv")).unwrap();
    let b2 = std::fs::read(dir.path().join("s2.csv")).unwrap();
    let b3 = std::fs::read(dir.path().join("s3.csv")).unwrap();
    assert_eq!(b1, b2, "repeat run changed the CSV");
    assert_eq!(b1, b3, "job count changed the CSV");
    assert_eq!(b1.iter().filter(|&&c| c == b'\n').count(), 3);
}

#[test]
fn fit_recovers_synthetic_laws() {
    let dir = tempfile::tempdir().unwrap();
    let p = solve_radial_ground_state(1e-10, 20.0).unwrap();
    let a_star = p.a_star;
    let b0qq = log_self_energy(&p).unwrap();
    let c_target = a_star * a_star / 4.0 - a_star * a_star / 2.0 * a_star.ln() + 0.5 * b0qq;

    let records: Vec<SweepRecord> = (0..10)
        .map(|i| {
            let a = (0.90 + 0.01 * i as f64) * a_star;
            let eps = 2.0 / a_star * ((a_star - a) / a_star).sqrt();
            SweepRecord {
                a,
                e_a: a * a / 4.0 * (4.0 * (a_star - a)).ln() + c_target,
                epsilon_a: eps,
                mu_a: -1.0 / (a_star * eps * eps),
                x_a: (0.0, 0.0),
                l2_distance: 0.05,
                v_omega_xa: 0.0,
                runtime: 0.0,
                converged: true,
            }
        })
        .collect();
    let csv = dir.path().join("records.csv");
    write_sweep_csv(&csv, &records).unwrap();

    let out = psn(&["fit", "--in", "records.csv", "--out", "fit.json"], dir.path());
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let fit = json_file(&dir.path().join("fit.json"));
    assert_eq!(fit["all_pass"], true, "verdicts: {}", fit["verdicts"]);
    assert_eq!(fit["records_used"], 10);
    for v in fit["verdicts"].as_array().unwrap() {
        assert!(v["rel_err"].as_f64().unwrap() < 1e-6, "exact laws should fit tightly: {v}");
    }
}

#[test]
fn trial_bound_and_quiet_mode() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "cfg.json", r#"{
      "grid": { "n": 128, "half_width": 8.0 },
      "potential": { "kind": "harmonic", "lambda": 2.0, "omega": 1.0 }
    }"#);
    let out = psn(
        &["--quiet", "trial", "--config", "cfg.json", "--a", "5.0", "--tau", "1.0", "--out", "t.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "quiet run still printed: {}", String::from_utf8_lossy(&out.stdout));

    let t = json_file(&dir.path().join("t.json"));
    let closed = t["closed_form"].as_f64().unwrap();
    let gridded = t["grid_energy"].as_f64().unwrap();
    // tau = 1 resolves comfortably on this spacing
    assert!((closed - gridded).abs() < 5e-3 * closed.abs().max(1.0));
}
