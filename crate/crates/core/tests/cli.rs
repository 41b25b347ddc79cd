use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gwmc_core::cli::read_metadata;

fn gwmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwmc"))
        .args(args)
        .env("GWMC_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gwmc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn prefix(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

const SMALL: &[&str] = &["--width", "4", "--height", "4", "--t-total", "60", "--burn-in", "10"];

#[test]
fn identical_inputs_give_identical_series() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (prefix(dir.path(), "a"), prefix(dir.path(), "b"));
    ok(&[&["run", "--out", &a], SMALL].concat());
    ok(&[&["run", "--out", &b], SMALL].concat());
    let sa = fs::read(format!("{a}_series.csv")).unwrap();
    assert_eq!(sa, fs::read(format!("{b}_series.csv")).unwrap());
    let header = String::from_utf8(sa).unwrap();
    assert!(header.starts_with("time,Mx,My,Mz,Sxx_inst,jumps_this_interval\n"));
}

#[test]
fn metadata_reruns_the_same_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let a = prefix(dir.path(), "a");
    ok(&[&["run", "--out", &a, "--jy", "1.37", "--seed", "9"], SMALL].concat());
    let meta = format!("{a}_meta.txt");
    let b = prefix(dir.path(), "b");
    ok(&["run", "--config", &meta, "--out", &b]);
    assert_eq!(
        fs::read(format!("{a}_series.csv")).unwrap(),
        fs::read(format!("{b}_series.csv")).unwrap()
    );
    let m = read_metadata(Path::new(&meta)).unwrap();
    assert_eq!(m["jy"], "1.37");
    assert_eq!(m["seed"], "9");
    assert_eq!(m["rng_algorithm"], "chacha8");
}

#[test]
fn resume_matches_continuous_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = prefix(dir.path(), "full");
    let half = prefix(dir.path(), "half");
    let rest = prefix(dir.path(), "rest");
    ok(&[&["run", "--out", &full, "--t-total", "80"], &SMALL[..4], &["--burn-in", "10"]].concat());
    ok(&[&["run", "--out", &half, "--t-total", "40"], &SMALL[..4], &["--burn-in", "10"]].concat());
    ok(&[&["run", "--out", &rest, "--t-total", "80", "--resume-from", &half], &SMALL[..4], &["--burn-in", "10"]].concat());
    let full_rows: Vec<String> = fs::read_to_string(format!("{full}_series.csv")).unwrap().lines().map(String::from).collect();
    let half_rows = fs::read_to_string(format!("{half}_series.csv")).unwrap();
    let rest_rows = fs::read_to_string(format!("{rest}_series.csv")).unwrap();
    let joined: Vec<String> = half_rows.lines().chain(rest_rows.lines().skip(1)).map(String::from).collect();
    assert_eq!(full_rows, joined);
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = gwmc(&["run", "--out", &prefix(dir.path(), "x"), "--gamma", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "jy=1.2\nbogus=3\n").unwrap();
    let out = gwmc(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    assert_eq!(gwmc(&["run", "--width", "abc"]).status.code(), Some(1));
}

#[test]
fn empty_sweep_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = gwmc(&["sweep", "--out", &prefix(dir.path(), "s"), "--jy-values", "", "--sizes", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let s = prefix(dir.path(), "s");
    ok(&["sweep", "--out", &s, "--jy-values", "1.2,2.5", "--sizes", "2,3", "--t-total", "30", "--burn-in", "5"]);
    let csv = fs::read_to_string(format!("{s}_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "jy,L,Sxx_k0,Sxx_stderr,Mx_abs_mean,sample_count,trajectories");
    assert_eq!(lines.len(), 5);
}

#[test]
fn corrupted_oracle_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = gwmc(&["oracle-check", "--sites", "2", "--trajectories", "1000", "--corrupt-jump", "--out", &prefix(dir.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
    let report = fs::read_to_string(dir.path().join("o_oracle.txt")).unwrap();
    assert!(report.contains("check=unraveling_exactness status=FAIL"));
    assert!(report.trim_end().ends_with("overall=FAIL"));
}

#[test]
fn oracle_check_passes_on_two_sites() {
    let stdout = ok(&["oracle-check", "--sites", "2", "--trajectories", "4000"]);
    assert!(stdout.trim_end().ends_with("overall=PASS"), "{stdout}");
    assert!(stdout.contains("check=single_spin_decay status=PASS") || stdout.contains("status=PASS"));
}

#[test]
fn isotropic_mean_field_has_no_transition() {
    let dir = tempfile::tempdir().unwrap();
    let m = prefix(dir.path(), "m");
    let stdout = ok(&["mf-curve", "--out", &m, "--jx", "1", "--jz", "1"]);
    assert!(stdout.contains("no_transition=true"));
    let meta = read_metadata(Path::new(&format!("{m}_meta.txt"))).unwrap();
    assert_eq!(meta["no_transition"], "true");
}

#[test]
fn mf_curve_reports_transition_point() {
    let dir = tempfile::tempdir().unwrap();
    let m = prefix(dir.path(), "m");
    let stdout = ok(&["mf-curve", "--out", &m]);
    assert!(stdout.contains("transition_point=1.0390625"));
    let csv = fs::read_to_string(format!("{m}_mf.csv")).unwrap();
    assert_eq!(csv.lines().count(), 152);
}

#[test]
fn frozen_ferromagnet_is_fully_correlated() {
    let dir = tempfile::tempdir().unwrap();
    let c = prefix(dir.path(), "c");
    ok(&[
        "correlate", "--out", &c, "--width", "4", "--height", "4", "--jx", "1", "--jy", "1", "--jz", "1",
        "--gamma", "0", "--t-total", "10", "--burn-in", "1",
    ]);
    let csv = fs::read_to_string(format!("{c}_corr.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let corr: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((corr - 1.0).abs() < 1e-9, "{line}");
    }
    let axis = fs::read_to_string(format!("{c}_axis.csv")).unwrap();
    assert!(axis.starts_with("axis,distance,corr_xx,stderr,pair_count\n"));
}

#[test]
fn xxz_run_records_trap_time() {
    let dir = tempfile::tempdir().unwrap();
    let r = prefix(dir.path(), "r");
    let stdout = ok(&["run", "--out", &r, "--jy", "0.9", "--t-total", "300"]);
    assert!(stdout.contains("trapped_at="));
    let meta = read_metadata(Path::new(&format!("{r}_meta.txt"))).unwrap();
    let t: f64 = meta["trapped_at"].parse().unwrap();
    assert!(t > 0.0 && t < 300.0);
}
