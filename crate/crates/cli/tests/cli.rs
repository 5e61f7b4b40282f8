use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use pacs_core::analytics::{mandel_q_analytic, quadrature_variance_analytic};
use pacs_core::params::ParamsConfig;
use pacs_core::SystemParams;
use serde_json::Value;

fn pacs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pacs")).args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn prepare_reports_paper_variances() {
    let dir = tempfile::tempdir().unwrap();
    let o = pacs(&["prepare", "--preset", "simon17", "--P0", "50uW", "--P1", "0.5uW", "--T", "1K"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("prepare.json"));
    let vqq = r["covariance"]["vqq"].as_f64().unwrap();
    assert!((vqq - 0.5139).abs() <= 0.02, "{vqq}");
    assert!(r["covariance"]["spectral_max_diff"].as_f64().unwrap() < 1e-6);
    assert!(r["modulation"]["vqq_peak_to_peak"].as_f64().unwrap() > 0.0);
    assert_eq!(r["params"]["name"], "simon17");
}

#[test]
fn prepare_without_probe_has_no_modulation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pacs(&["prepare", "--P1", "0W"], dir.path())), 0);
    let r = json(&dir.path().join("prepare.json"));
    assert_eq!(r["modulation"]["vqq_peak_to_peak"].as_f64().unwrap(), 0.0);
    assert_eq!(r["modulation"]["vpp_peak_to_peak"].as_f64().unwrap(), 0.0);
}

#[test]
fn prepare_at_ten_kelvin() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pacs(&["prepare", "--T", "10K"], dir.path())), 0);
    let r = json(&dir.path().join("prepare.json"));
    assert!((r["thermal_occupation"].as_f64().unwrap() - 39.19).abs() < 0.05);
    assert!((r["covariance"]["vqq"].as_f64().unwrap() - 0.5887).abs() <= 0.02);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["prepare", "--P0", "50"],
        vec!["prepare", "--T", "10"],
        vec!["prepare", "--P0", "50uK"],
        vec!["prepare", "--preset", "nonexistent"],
        vec!["pacs-scan", "--beta-min", "2", "--beta-max", "1"],
        vec!["pacs-scan", "--b-list", "0.5,0.25"],
        vec!["thermal-scan", "--n0-list", "0.5"],
        vec!["validate", "--nmax", "1"],
        vec!["no-such-command"],
    ] {
        let o = pacs(&args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_file_matches_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("params.json");
    fs::write(&cfg, serde_json::to_string(&ParamsConfig::from_params(&SystemParams::simon17(), None)).unwrap()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&pacs(&["prepare", "--config", cfg.to_str().unwrap()], &a)), 0);
    assert_eq!(code(&pacs(&["prepare"], &b)), 0);
    let (ra, rb) = (json(&a.join("prepare.json")), json(&b.join("prepare.json")));
    assert!((ra["covariance"]["vqq"].as_f64().unwrap() - rb["covariance"]["vqq"].as_f64().unwrap()).abs() < 1e-12);

    fs::write(&cfg, "{\"mechanical_frequency_hz\": 1.0}").unwrap();
    assert_eq!(code(&pacs(&["prepare", "--config", cfg.to_str().unwrap()], &a)), 2);
}

#[test]
fn meanfield_writes_trajectory_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = pacs(&["meanfield", "--record-periods", "40"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,q,p,re_a,im_a");
    assert!(text.lines().count() > 40 * 32);
    let side = json(&dir.path().join("trajectory.json"));
    assert_eq!(side["params"]["name"], "simon17");
    let fit = json(&dir.path().join("meanfield_fit.json"));
    assert!(fit["fit"]["fit_residual"].as_f64().unwrap() < 0.05);
    assert!(fit["fit"]["discrepancies"]["q1_amplitude_rel"].as_f64().unwrap() < 0.05);
}

const SMALL_SCAN: &[&str] = &["pacs-scan", "--beta-step", "1", "--b-list", "0.15,0.5", "--theta-points", "3", "--b-points", "3"];

#[test]
fn pacs_scan_emits_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = pacs(SMALL_SCAN, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["fig2a", "fig2b", "fig2c", "fig2d"] {
        let (header, rows) = table(&dir.path().join(format!("{name}.csv")));
        assert_eq!(header.len(), 7);
        assert_eq!(header[4], "max_abs_diff");
        assert!(rows.iter().all(|r| r[4] < 1e-6 && r[6] == 1.0), "{name}");
        let side = json(&dir.path().join(format!("{name}.json")));
        assert_eq!(side["file"], format!("{name}.csv"));
        assert_eq!(side["columns"].as_array().unwrap().len(), 7);
        assert!((side["settings"]["z"].as_f64().unwrap() - 0.98).abs() <= 0.005);
        assert!((side["settings"]["b"].as_f64().unwrap() - 0.15).abs() <= 0.005);
        assert!(side["params"]["mechanical_frequency_hz"].as_f64().is_some());
    }
    let (_, rows) = table(&dir.path().join("fig2a.csv"));
    assert_eq!(rows.len(), 10);
}

#[test]
fn single_point_scan_equals_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["pacs-scan", "--z", "0.98", "--b", "0.15", "--beta-min", "2", "--beta-max", "2", "--b-list", "0.25", "--theta-points", "1", "--b-points", "1"];
    assert_eq!(code(&pacs(&args, dir.path())), 0);
    let (_, a) = table(&dir.path().join("fig2a.csv"));
    let (_, b) = table(&dir.path().join("fig2b.csv"));
    let alpha = Complex64::new(0.98 * 2.0, 0.0);
    let q: f64 = format!("{:.8e}", mandel_q_analytic(alpha, 1, 0.25).unwrap()).parse().unwrap();
    let v: f64 = format!("{:.8e}", 4.0 * quadrature_variance_analytic(alpha, 0.25, std::f64::consts::FRAC_PI_2).unwrap()).parse().unwrap();
    assert_eq!(a.len(), 1);
    assert_eq!(a[0][2], q);
    assert_eq!(b[0][2], v);
}

#[test]
fn scans_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&pacs(SMALL_SCAN, &a)), 0);
    assert_eq!(code(&pacs(SMALL_SCAN, &b)), 0);
    for name in ["fig2a.csv", "fig2a.json", "fig2b.csv", "fig2c.csv", "fig2d.csv", "fig2d.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn thermal_scan_reduces_to_pure_pacs_and_orders_curves() {
    let dir = tempfile::tempdir().unwrap();
    let beta = ["--beta-step", "0.5", "--beta-max", "2"];
    let mut args = vec!["thermal-scan", "--z", "0.98", "--b", "0.15", "--n0-list", "0,0.2", "--n0-curves", "0,0.2,0.45"];
    args.extend(beta);
    let o = pacs(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut args = vec!["pacs-scan", "--z", "0.98", "--b", "0.15", "--b-list", "0.15", "--theta-points", "1", "--b-points", "1"];
    args.extend(beta);
    assert_eq!(code(&pacs(&args, &dir.path().join("pure"))), 0);

    let (_, pure) = table(&dir.path().join("pure/fig2b.csv"));
    let (_, curves) = table(&dir.path().join("fig3b.csv"));
    for (p, t) in pure.iter().zip(curves.iter().filter(|r| r[0] == 0.0)) {
        assert_eq!(p[1], t[1]);
        assert!((p[2] - t[2]).abs() < 1e-6, "{p:?} vs {t:?}");
    }
    let side = json(&dir.path().join("fig3b.json"));
    assert_eq!(side["summary"]["increasing_in_n0"], true);
    let side = json(&dir.path().join("fig3a.json"));
    assert!(side["summary"]["truncation_audit"]["max_abs_diff_n0_le_0_2"].as_f64().is_some());
    let (header, rows) = table(&dir.path().join("fig3a.csv"));
    assert_eq!(header[3], "q_full");
    assert_eq!(rows.len(), 10);
}

#[test]
fn thermal_scan_beyond_limit_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["thermal-scan", "--beta-min", "1", "--beta-max", "1", "--n0-list", "0.6", "--n0-curves", "0.6"];
    assert_eq!(code(&pacs(&args, dir.path())), 2);
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&pacs(&forced, dir.path())), 0);
}

#[test]
fn validate_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = pacs(&["validate"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS ")).count(), 6);
    assert_eq!(json(&dir.path().join("validate.json"))["passed"], true);
}

#[test]
fn validate_flags_broken_timing() {
    let dir = tempfile::tempdir().unwrap();
    let ten_over_gamma = 10.0 / SystemParams::simon17().gamma;
    let tau = format!("{}us", ten_over_gamma * 1e6);
    let o = pacs(&["validate", "--tau-r", &tau], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL sequence timing"), "{}", stdout(&o));
}

#[test]
fn validate_flags_small_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let o = pacs(&["validate", "--nmax", "5", "--beta-max", "3"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL truncation convergence"), "{}", stdout(&o));
}
