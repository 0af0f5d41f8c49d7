use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qdsim::export::Report;
use qdsim_core::calibration::calibrated_emitter;
use qdsim_core::emitter::{brightness, pulse_occupation};
use qdsim_core::photon::poisson_stream;

fn qdsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run qdsim")
}

fn report(path: &Path) -> Report {
    Report::parse(&fs::read_to_string(path).unwrap())
}

fn num(r: &Report, key: &str) -> f64 {
    r.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_count_follows_binomial_product() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("eta.conf"), "excitation.collection_efficiency = 0.3\n").unwrap();
    let out = qdsim(dir.path(), &["--config", "eta.conf", "--out", "run", "simulate", "--duration", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("run/manifest.txt"));
    let c = calibrated_emitter();
    let q = pulse_occupation(std::f64::consts::PI, c.prep_fidelity) * brightness(&c, -0.57);
    let mean = c.rep_rate * 0.1 * q * 0.3 * (1.0 + c.reexcitation_prob);
    let n = num(&r, "truth_count");
    assert!((n - mean).abs() < 4.0 * mean.sqrt(), "{n} vs {mean}");
    assert_eq!(r.get("tool"), Some("qdsim"));
    assert_eq!(r.get("config_hash").unwrap().len(), 64);
    let bytes = fs::metadata(dir.path().join("run/truth.qtag")).unwrap().len();
    assert_eq!(bytes, num(&r, "truth_bytes") as u64);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = qdsim(dir.path(), &["--seed", "9", "--out", out, "simulate", "--duration", "0.002"]);
        assert_eq!(o.status.code(), Some(0));
        let o = qdsim(dir.path(), &["--seed", "9", "--out", out, "g2", "--duration", "0.01"]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(files(&dir.path().join("a")), files(&dir.path().join("b")));
    let o = qdsim(dir.path(), &["--seed", "10", "--out", "c", "simulate", "--duration", "0.002"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(dir.path().join("a/truth.qtag")).unwrap(), fs::read(dir.path().join("c/truth.qtag")).unwrap());
}

#[test]
fn hard_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdsim(dir.path(), &["simulate", "--duration", "0"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("bad.conf"), "# ok\nlifetime = 1e-9\nrep_rate = fast\n").unwrap();
    let o = qdsim(dir.path(), &["--config", "bad.conf", "grid"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config line 3"), "{}", String::from_utf8_lossy(&o.stderr));
    let o = qdsim(dir.path(), &["g2", "--input", "missing.qtag"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qdsim(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn g2_of_poisson_file_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let s = poisson_stream(&[1e6, 1e6], 1.0, 77).unwrap();
    qdsim::qtag::write_file(&dir.path().join("poisson.qtag"), &s).unwrap();
    let o = qdsim(dir.path(), &["--out", "g2", "g2", "--input", "poisson.qtag"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("g2/g2_report.txt"));
    let g = num(&r, "g2_zero");
    assert!((g - 1.0).abs() < 0.03, "{g} ± {}", num(&r, "g2_zero_err"));
    assert_eq!(r.get("pulsed"), Some("false"));
    let csv = fs::read_to_string(dir.path().join("g2/g2_histogram.csv")).unwrap();
    assert!(csv.starts_with("# bin_width_s=2.56e-10\n"));
    assert!(csv.lines().any(|l| l == "delay_s,counts,normalized,uncertainty"));
}

#[test]
fn hom_accepts_any_matching_delay() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("eta.conf"), "excitation.collection_efficiency = 0.05\n").unwrap();
    let o = qdsim(dir.path(), &["--config", "eta.conf", "hom", "--delay", "3e-9", "--duration", "0.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("out/hom_report.txt"));
    assert_eq!(num(&r, "mzi_delay_s"), 3e-9);
    let v = num(&r, "visibility");
    assert!(v > 0.6 && v < 1.0, "{v}");
}

#[test]
fn hom_input_with_other_pulse_spacing_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdsim(dir.path(), &["simulate", "--duration", "0.001", "--double-pulse", "2e-9"]);
    assert_eq!(o.status.code(), Some(0));
    let o = qdsim(dir.path(), &["hom", "--input", "out/truth.qtag", "--delay", "4e-9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fpi_reports_fit_and_flags_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdsim(dir.path(), &["fpi", "--duration", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("out/fpi_report.txt"));
    assert!((num(&r, "total_fwhm_Hz") - 420e6).abs() < 30e6);
    let scan = fs::read_to_string(dir.path().join("out/fpi_scan.csv")).unwrap();
    assert!(scan.starts_with("detuning_Hz,intensity\n"));

    let conf = "fpi.fsr = 100e9\nfpi.sr_fwhm = 4e9\nfpi.scan_half_range = 10e9\nfpi.scan_step = 50e6\nfpi.grid_step = 10e6\n";
    fs::write(dir.path().join("wide.conf"), conf).unwrap();
    let o = qdsim(dir.path(), &["--config", "wide.conf", "--out", "wide", "fpi", "--duration", "0.01"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&dir.path().join("wide/fpi_report.txt")).get("resolution_limited"), Some("true"));
}

#[test]
fn grid_prints_resolution_and_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = qdsim(dir.path(), &["grid"]);
    assert_eq!(o.status.code(), Some(0));
    let r = Report::parse(&String::from_utf8(o.stdout).unwrap());
    assert!((num(&r, "resolution_Hz") - 805.9e6).abs() < 0.1e6);
    assert!((num(&r, "range_Hz") - 37.47e9).abs() < 0.01e9);
    assert_eq!(r.get("positions"), Some("94"));
}

#[test]
fn small_pcfs_scan_runs_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = "pcfs.max_opd = 0.02\npcfs.tau_min = 1e-6\npcfs.tau_max = 1e-4\npcfs.bins_per_decade = 1\n";
    fs::write(dir.path().join("small.conf"), conf).unwrap();
    let o = qdsim(dir.path(), &["--config", "small.conf", "pcfs", "--voltages", "-0.57,-0.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("out/pcfs_report.txt"));
    assert_eq!(r.get("positions"), Some("6"));
    assert_eq!(r.get("flagged"), Some("true"));
    let lw = fs::read_to_string(dir.path().join("out/pcfs_linewidth_1.csv")).unwrap();
    assert!(lw.starts_with("# voltage_V=-5e-1\ntau_s,"));
    assert_eq!(lw.lines().count(), 4);
}

#[test]
fn short_sweep_peaks_at_plateau_center() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--from", "-0.63", "--to", "-0.51", "--step", "0.03", "--duration", "0.002"];
    let o = qdsim(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("out/sweep_report.txt"));
    assert_eq!(num(&r, "linewidth_min_V"), -0.57);
    assert_eq!(num(&r, "intensity_max_V"), -0.57);
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}
