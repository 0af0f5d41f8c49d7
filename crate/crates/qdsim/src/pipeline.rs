//! End-to-end experiment pipelines shared by the subcommands.

use qdsim_core::correlator::{long_delay_profile, ChannelSet, CorrelationHistogram, G2Result, HistogramSpec, LongDelayProfile};
use qdsim_core::emitter::{brightness, simulate, EmitterConfig, Excitation, Species};
use qdsim_core::photon::{apply_detector, beam_splitter, DetectorModel, TagStream};
use qdsim_core::rng::derive_seed;
use qdsim_core::spectroscopy::{
    counting_noise, fit_voigt_sr, fpi_scan, spectrum_from_truth, uniform_grid, LineshapeFit, Spectrum, SystemResponse,
};

use crate::config::{Config, FpiSettings, G2Settings};
use crate::error::{Error, Result};
use crate::export::SweepRow;
use crate::parallel::correlate_parallel;

/// Seed of the emission Monte Carlo for a run seeded with `seed`.
pub fn emission_seed(seed: u64) -> u64 {
    derive_seed(seed, 0)
}

/// Seed of the measurement stage (optics, detectors, noise).
pub fn analysis_seed(seed: u64) -> u64 {
    derive_seed(seed, 1)
}

pub fn excitation(config: &Config) -> Excitation {
    Excitation::single(config.excitation.pulse_area).with_collection_efficiency(config.excitation.collection_efficiency)
}

/// Truth stream of `duration` seconds at `voltage`, tagged with the config hash.
pub fn simulate_truth(config: &Config, excitation: &Excitation, voltage: f64, duration: f64, seed: u64) -> Result<TagStream> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::Usage(format!("duration must be positive, got {duration}")));
    }
    let mut s = simulate(&config.emitter, voltage, excitation, duration, emission_seed(seed))?;
    s.set_metadata("config_hash", config.hash());
    Ok(s)
}

/// Hanbury Brown–Twiss arm: 50/50 split then one detector per port.
pub fn hbt_detect(truth: &TagStream, detector: &DetectorModel, seed: u64) -> Result<TagStream> {
    let split = beam_splitter(truth, derive_seed(seed, 1))?;
    let mut out = apply_detector(&split, detector, derive_seed(seed, 2))?;
    out.set_metadata("creation_op", "hbt_detect");
    Ok(out)
}

pub fn metadata_rep_period(stream: &TagStream) -> Option<f64> {
    let rate: f64 = stream.metadata().get("rep_rate_Hz")?.parse().ok()?;
    (rate > 0.0).then(|| 1.0 / rate)
}

#[derive(Clone, Debug, PartialEq)]
pub struct G2Measurement {
    pub result: G2Result,
    pub histogram: CorrelationHistogram,
    pub long_delay: LongDelayProfile,
    /// Whether the repetition period came from the stream itself.
    pub pulsed: bool,
}

/// g²(τ) between the first two channels. Single-channel (truth) streams go
/// through [`hbt_detect`] first.
pub fn g2_measure(stream: &TagStream, config: &Config, seed: u64) -> Result<G2Measurement> {
    let detected = match stream.channel_count() {
        1 => hbt_detect(stream, &config.detector, seed)?,
        _ => stream.clone(),
    };
    g2_from_detected(&detected, &config.g2, metadata_rep_period(stream), 1.0 / config.emitter.rep_rate)
}

pub fn g2_from_detected(
    detected: &TagStream,
    settings: &G2Settings,
    rep_period: Option<f64>,
    fallback_period: f64,
) -> Result<G2Measurement> {
    if detected.channel_count() < 2 {
        return Err(Error::Usage("g2 needs a stream with at least two channels".into()));
    }
    let spec = HistogramSpec::symmetric(settings.bin_width, settings.long_max_delay)?;
    let histogram = correlate_parallel(detected, ChannelSet::single(0), ChannelSet::single(1), spec)?;
    let period = rep_period.unwrap_or(fallback_period);
    let result = qdsim_core::correlator::g2_pulsed(&histogram, period)?;
    let long_delay = long_delay_profile(&histogram, settings.coarse_bin, rep_period)?;
    Ok(G2Measurement { result, histogram, long_delay, pulsed: rep_period.is_some() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpiMeasurement {
    /// Absolute frequency the detuning axes are measured from (median photon frequency).
    pub reference: f64,
    pub truth: Spectrum,
    pub scan: Spectrum,
    pub fit: LineshapeFit,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Truth spectrum, FPI scan with counting noise, and the Voigt⊗SR fit.
pub fn fpi_measure(
    truth: &TagStream,
    lifetime: f64,
    settings: &FpiSettings,
    fixed_lorentzian: Option<f64>,
    seed: u64,
) -> Result<FpiMeasurement> {
    let freq = truth
        .truth_frequencies()
        .ok_or_else(|| Error::Usage("fpi needs a truth stream".into()))?;
    if freq.is_empty() {
        return Err(Error::Usage("stream has no photons".into()));
    }
    let reference = median(freq);
    let centered = truth.map_truth_frequency(|t| t.truth.map_or(0.0, |x| x.frequency) - reference)?;
    let half = settings.scan_half_range;
    let grid = uniform_grid(-1.5 * half, 1.5 * half, settings.grid_step)?;
    let spectrum = spectrum_from_truth(&centered, lifetime, &grid)?;
    let scan_axis = uniform_grid(-half, half, settings.scan_step)?;
    let mut scan = fpi_scan(&spectrum, settings.params, &scan_axis)?;
    if settings.peak_counts > 0.0 {
        scan = counting_noise(&scan, settings.peak_counts, seed)?;
    }
    let fit = fit_voigt_sr(&scan, &SystemResponse::fpi(settings.params), fixed_lorentzian)?;
    Ok(FpiMeasurement { reference, truth: spectrum, scan, fit })
}

/// One point of a gate-voltage sweep: free-Lorentzian FPI fit plus the
/// collected photon rate. Every voltage uses the same seed so neighbouring
/// points differ only through the voltage dependence of the emitter.
pub fn sweep_point(config: &Config, voltage: f64, duration: f64, seed: u64) -> Result<SweepRow> {
    let species = config.emitter.species(voltage);
    if species == Species::None || brightness(&config.emitter, voltage) <= 0.0 {
        return Ok(SweepRow {
            voltage,
            species: species.label().to_string(),
            linewidth: f64::NAN,
            uncertainty: f64::NAN,
            lorentzian: f64::NAN,
            gaussian: f64::NAN,
            intensity: 0.0,
            resolution_limited: false,
        });
    }
    let truth = simulate_truth(config, &excitation(config), voltage, duration, seed)?;
    let m = fpi_measure(&truth, config.emitter.lifetime, &config.fpi, None, analysis_seed(seed))?;
    Ok(SweepRow {
        voltage,
        species: species.label().to_string(),
        linewidth: m.fit.total_fwhm,
        uncertainty: m.fit.uncertainty.total_fwhm,
        lorentzian: m.fit.lorentzian_fwhm,
        gaussian: m.fit.gaussian_fwhm,
        intensity: truth.len() as f64 / duration,
        resolution_limited: m.fit.resolution_limited,
    })
}

/// Voltages from `from` to `to` inclusive in steps of `step`, rounded to 1 µV.
pub fn voltage_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(to >= from) {
        return Err(Error::Usage("sweep needs step > 0 and to >= from".into()));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| ((from + i as f64 * step) * 1e6).round() / 1e6).collect())
}

/// Lifetime recorded in stream metadata, else the configured one.
pub fn stream_lifetime(stream: &TagStream, emitter: &EmitterConfig) -> f64 {
    stream
        .metadata()
        .get("lifetime_s")
        .and_then(|v| v.parse().ok())
        .unwrap_or(emitter.lifetime)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voltage_grid_is_inclusive() {
        let g = voltage_grid(-0.70, -0.40, 0.01).unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[17], -0.53);
        assert_eq!(*g.last().unwrap(), -0.4);
        assert!(voltage_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn dark_voltages_give_empty_rows() {
        let row = sweep_point(&Config::default(), 0.5, 1e-3, 1).unwrap();
        assert_eq!(row.species, "none");
        assert_eq!(row.intensity, 0.0);
        assert!(row.linewidth.is_nan());
    }
}
