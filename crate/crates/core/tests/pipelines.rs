use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qdsim_core::calibration::{self, calibrated_emitter, pcfs_emitter, LIFETIME, PLATEAU_CENTER, TARGET_G2};
use qdsim_core::correlator::{correlate, g2_pulsed, ChannelSet, HistogramSpec};
use qdsim_core::emitter::{brightness, pulse_occupation, simulate, Excitation};
use qdsim_core::interference::{hom_simulate, HomSetup};
use qdsim_core::pcfs::{mzi_dither_correlate, pcfs_assemble, truth_contrasts, PCFSScanConfig};
use qdsim_core::photon::{apply_detector, beam_splitter, DetectorModel, PhotonTag, TagStream};
use qdsim_core::spectroscopy::{
    counting_noise, fit_voigt_sr, fpi_scan, spectrum_from_truth, uniform_grid, FpiParams, SystemResponse,
};

#[test]
fn simulated_count_matches_binomial_product() {
    let c = calibrated_emitter();
    let eta = 0.3;
    let duration = 0.2;
    let s = simulate(&c, PLATEAU_CENTER, &Excitation::single(PI).with_collection_efficiency(eta), duration, 5).unwrap();
    let q = pulse_occupation(PI, c.prep_fidelity) * brightness(&c, PLATEAU_CENTER);
    let p = c.reexcitation_prob;
    let mean = c.rep_rate * duration * q * eta * (1.0 + p);
    let sigma = (mean * (1.0 + 2.0 * p)).sqrt();
    let n = s.len() as f64;
    assert!((n - mean).abs() < 4.0 * sigma, "{n} vs {mean} ± {sigma}");
}

#[test]
fn pulsed_g2_matches_calibration() {
    let c = calibrated_emitter();
    let truth = simulate(&c, PLATEAU_CENTER, &Excitation::single(PI), 0.1, 11).unwrap();
    let split = beam_splitter(&truth, 12).unwrap();
    let det = apply_detector(&split, &DetectorModel::high_efficiency_spad(), 13).unwrap();
    let spec = HistogramSpec::symmetric(256e-12, 150e-9).unwrap();
    let h = correlate(&det, ChannelSet::single(0), ChannelSet::single(1), spec).unwrap();
    let g = g2_pulsed(&h, 1.0 / c.rep_rate).unwrap();
    assert!((g.g2_zero - TARGET_G2).abs() < 0.005, "{} ± {}", g.g2_zero, g.uncertainty);
}

#[test]
fn fpi_closed_loop_recovers_stationary_width() {
    let c = calibrated_emitter();
    let truth = simulate(&c, PLATEAU_CENTER, &Excitation::single(PI), 0.01, 21).unwrap();
    let mut f: Vec<f64> = truth.truth_frequencies().unwrap().to_vec();
    f.sort_by(f64::total_cmp);
    let median = f[f.len() / 2];
    let centered = truth.map_truth_frequency(|t| t.truth.unwrap().frequency - median).unwrap();
    let grid = uniform_grid(-4.5e9, 4.5e9, 2e6).unwrap();
    let spectrum = spectrum_from_truth(&centered, LIFETIME, &grid).unwrap();
    let params = FpiParams::default();
    let scan = fpi_scan(&spectrum, params, &uniform_grid(-3e9, 3e9, 10e6).unwrap()).unwrap();
    let noisy = counting_noise(&scan, 5000.0, 22).unwrap();
    let fit = fit_voigt_sr(&noisy, &SystemResponse::fpi(params), Some(250e6)).unwrap();
    assert!((fit.total_fwhm - calibration::STATIONARY_FWHM).abs() < 30e6, "{}", fit.total_fwhm);
}

#[test]
fn hom_visibility_follows_the_model() {
    let c = calibrated_emitter();
    let d = 2e-9;
    let s = simulate(&c, PLATEAU_CENTER, &Excitation::double(PI, d).with_collection_efficiency(0.05), 1.0, 31).unwrap();
    let r = hom_simulate(&s, &HomSetup::new(d, LIFETIME), 32).unwrap();
    let model = calibration::hom_visibility_model(&c, PLATEAU_CENTER, d, TARGET_G2);
    let v = r.visibility.value;
    assert!((v - model).abs() < 0.05 && (v - model).abs() < 4.0 * r.visibility.uncertainty + 0.01, "{v} vs {model}");
}

#[test]
fn dither_contrast_agrees_with_pair_oracle() {
    let cfg = PCFSScanConfig { tau_edges: vec![1e-6, 1e-5, 1e-4, 1e-3], ..PCFSScanConfig::default() };
    let s = simulate(&pcfs_emitter(), PLATEAU_CENTER, &Excitation::single(PI).with_collection_efficiency(0.1), 0.05, 41)
        .unwrap();
    let opds = [0.0, 0.04, 0.08];
    let oracle = truth_contrasts(&s, &opds, &cfg.tau_edges, 7, 42).unwrap();
    for (k, &x) in opds.iter().enumerate() {
        let m = mzi_dither_correlate(&s, x, &cfg, 43 + k as u64).unwrap();
        for b in 0..3 {
            let (v, u, o) = (m.contrast[b], m.uncertainty[b], oracle.contrast[b][k]);
            assert!((v - o).abs() < 4.0 * u + 0.01, "opd {x} bin {b}: {v} ± {u} vs {o}");
        }
    }
}

/// Photons with i.i.d. Lorentzian frequencies (FWHM `w`) and no other
/// broadening, evenly spaced in time.
fn static_lorentzian_stream(w: f64, n: u64, duration: f64, seed: u64) -> TagStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = (duration * 1e12) as u64 / n;
    let tags: Vec<_> = (0..n)
        .map(|i| {
            let f = 0.5 * w * (PI * (rng.random::<f64>() - 0.5)).tan();
            PhotonTag::with_truth(0, i * dt + rng.random_range(0..dt), f, 0.0)
        })
        .collect();
    TagStream::from_tags(&tags, n * dt, vec!["emitter".into()]).unwrap()
}

#[test]
fn pcfs_recovers_static_lorentzian() {
    let cfg = PCFSScanConfig { tau_edges: vec![1e-6, 1e-5, 1e-4], ..PCFSScanConfig::default() };
    let w = 1e9;
    let s = static_lorentzian_stream(w, 200_000, cfg.acquisition_time, 51);
    let positions = cfg.opds().iter().enumerate().map(|(i, &x)| mzi_dither_correlate(&s, x, &cfg, 100 + i as u64).unwrap()).collect();
    let r = pcfs_assemble(&cfg, None, positions).unwrap();
    for (l, f) in r.linewidth.iter().zip(&r.flags) {
        assert!((l / w - 1.0).abs() < 0.05, "{l}");
        assert!(!f.any(), "{f:?}");
    }
}
