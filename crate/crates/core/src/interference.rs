//! Two-photon (Hong-Ou-Mandel) interference.
//!
//! The pair kernel gives the time-integrated coincidence suppression of two
//! exponential wavepackets with Markovian dephasing and a frequency offset.
//! The Monte Carlo routes truth photons from double-pulse excitation through
//! an unbalanced Mach-Zehnder interferometer and lets pairs that overlap at
//! the output splitter bunch with the kernel probability.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::correlator::{correlate, ChannelSet, CorrelationHistogram, HistogramSpec};
use crate::error::{bail, Error, Result};
use crate::linalg;
use crate::photon::{apply_detector, DetectorModel, TagStream, GAUSSIAN_FWHM_PER_SIGMA, PS_PER_SECOND};
use crate::rng::{self, derive_seed};
use crate::spectroscopy::Spectrum;
use crate::voigt::faddeeva;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairKernelParams {
    /// Radiative decay rate Γ = 1/lifetime, 1/s.
    pub decay_rate: f64,
    pub dephasing_a: f64,
    pub dephasing_b: f64,
    /// Frequency difference between the photons, Hz.
    pub detuning: f64,
}

/// `Γ(Γ+γa+γb) / ((Γ+γa+γb)² + (2πδ)²)`.
pub fn pair_visibility(p: &PairKernelParams) -> f64 {
    let g = p.decay_rate + p.dephasing_a + p.dephasing_b;
    let w = 2.0 * PI * p.detuning;
    p.decay_rate * g / (g * g + w * w)
}

/// Reference value of the pair visibility from a direct double time
/// integral of the two-detector coincidence probability behind a 50/50
/// splitter, using Simpson's rule on `n × n` points (`n` even).
///
/// Each photon is an exponential wavepacket `√Γ e^{−Γt/2} e^{−iωt}` whose
/// phase diffuses so that `⟨e^{i(φ(t)−φ(t'))}⟩ = e^{−γ|t−t'|}`.
pub fn pair_visibility_numerical(p: &PairKernelParams, n: usize) -> f64 {
    let n = n.max(2) & !1;
    let gamma = p.decay_rate;
    let t_max = 30.0 / gamma;
    let h = t_max / n as f64;
    let weight = |i: usize| -> f64 {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let omega = 2.0 * PI * p.detuning;
    let amp = |t: f64, w: f64| -> Complex64 {
        let r = libm::sqrt(gamma) * libm::exp(-0.5 * gamma * t);
        Complex64::new(r * libm::cos(w * t), -r * libm::sin(w * t))
    };
    let mut coincidence = 0.0;
    for i in 0..=n {
        let t1 = i as f64 * h;
        let a1 = amp(t1, omega);
        let b1 = amp(t1, 0.0);
        let wi = weight(i);
        for j in 0..=n {
            let t2 = j as f64 * h;
            let a2 = amp(t2, omega);
            let b2 = amp(t2, 0.0);
            let direct = a1.norm_sqr() * b2.norm_sqr() + b1.norm_sqr() * a2.norm_sqr();
            let coherence = libm::exp(-(p.dephasing_a + p.dephasing_b) * libm::fabs(t1 - t2));
            let cross = (a1 * b1.conj() * b2 * a2.conj()).re * coherence;
            coincidence += wi * weight(j) * 0.25 * (direct - 2.0 * cross);
        }
    }
    coincidence *= h * h / 9.0;
    1.0 - 2.0 * coincidence
}

/// Expectation of the pair kernel over a Gaussian detuning distribution with
/// variance `detuning_variance` (Hz²), in closed form via the Faddeeva function.
pub fn gaussian_averaged_visibility(decay_rate: f64, dephasing_sum: f64, detuning_variance: f64) -> f64 {
    let g = decay_rate + dephasing_sum;
    if detuning_variance <= 0.0 {
        return decay_rate / g;
    }
    let y = g / (2.0 * PI * libm::sqrt(2.0 * detuning_variance));
    let erfcx = faddeeva(Complex64::new(0.0, y)).re;
    decay_rate / g * libm::sqrt(PI) * y * erfcx
}

/// Expected visibility of photons drawn independently from two stationary
/// frequency distributions (the inhomogeneous parts of the spectra).
pub fn remote_visibility_estimate(
    spectrum_a: &Spectrum,
    spectrum_b: &Spectrum,
    decay_rate: f64,
    residual_dephasing: f64,
) -> Result<f64> {
    if !(decay_rate > 0.0) || !(residual_dephasing >= 0.0) {
        bail!(InvalidArgument, "need decay_rate > 0 and residual_dephasing >= 0");
    }
    let norm = |s: &Spectrum| -> Result<Vec<f64>> {
        let total: f64 = s.intensity().iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            bail!(InvalidArgument, "spectrum is not normalizable");
        }
        Ok(s.intensity().iter().map(|v| v / total).collect())
    };
    let pa = norm(spectrum_a)?;
    let pb = norm(spectrum_b)?;
    let mut v = 0.0;
    for (&nu_a, &wa) in spectrum_a.detuning().iter().zip(&pa) {
        if wa == 0.0 {
            continue;
        }
        for (&nu_b, &wb) in spectrum_b.detuning().iter().zip(&pb) {
            v += wa
                * wb
                * pair_visibility(&PairKernelParams {
                    decay_rate,
                    dephasing_a: residual_dephasing,
                    dephasing_b: residual_dephasing,
                    detuning: nu_a - nu_b,
                });
        }
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    Parallel,
    Orthogonal,
}

/// Shape of one coincidence peak: difference of two exponential delays
/// convolved with the Gaussian jitter of two detectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakShape {
    pub lifetime: f64,
    pub jitter_fwhm: f64,
}

impl PeakShape {
    /// Unit-area density at delay `u` seconds.
    pub fn density(&self, u: f64) -> f64 {
        let g = 1.0 / self.lifetime;
        let s = libm::sqrt(2.0) * self.jitter_fwhm / GAUSSIAN_FWHM_PER_SIGMA;
        let u = libm::fabs(u);
        if s == 0.0 {
            return 0.5 * g * libm::exp(-g * u);
        }
        let r = s * libm::sqrt(2.0);
        let gauss = libm::exp(-u * u / (2.0 * s * s));
        let erfcx = |x: f64| faddeeva(Complex64::new(0.0, x)).re;
        let x1 = (g * s * s - u) / r;
        let t1 = if x1 > 0.0 {
            gauss * erfcx(x1)
        } else {
            libm::exp(0.5 * g * g * s * s - g * u) * libm::erfc(x1)
        };
        let t2 = gauss * erfcx((g * s * s + u) / r);
        0.25 * g * (t1 + t2)
    }
}

/// Peak layout of a double-pulse HOM histogram.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepStructure {
    pub rep_period: f64,
    pub mzi_delay: f64,
}

impl RepStructure {
    /// Peak positions `k·T + {0, ±Δ, ±2Δ}` inside `[lo, hi]`, merged when
    /// closer than 1 ps.
    pub fn peak_positions(&self, lo: f64, hi: f64) -> Vec<f64> {
        let t = self.rep_period;
        let d = self.mzi_delay;
        let k_lo = libm::floor((lo - 2.0 * d) / t) as i64 - 1;
        let k_hi = libm::ceil((hi + 2.0 * d) / t) as i64 + 1;
        let mut out: Vec<f64> = Vec::new();
        for k in k_lo..=k_hi {
            for m in -2..=2 {
                let p = k as f64 * t + m as f64 * d;
                if p >= lo && p <= hi {
                    out.push(p);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| libm::fabs(*a - *b) < 1e-12);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Visibility {
    pub value: f64,
    pub uncertainty: f64,
    pub parallel_area: f64,
    pub orthogonal_area: f64,
}

fn ratio_visibility(par: f64, s_par: f64, orth: f64, s_orth: f64) -> Result<Visibility> {
    if !(orth > 0.0) {
        return Err(Error::UndefinedVisibility("orthogonal central area is zero".to_string()));
    }
    let r = par / orth;
    let rel = if par > 0.0 { libm::hypot(s_par / par, s_orth / orth) } else { 0.0 };
    let uncertainty = if par > 0.0 { r * rel } else { s_par / orth };
    Ok(Visibility { value: 1.0 - r, uncertainty, parallel_area: par, orthogonal_area: orth })
}

fn check_pair(parallel: &CorrelationHistogram, orthogonal: &CorrelationHistogram) -> Result<()> {
    if parallel.spec != orthogonal.spec {
        bail!(InvalidArgument, "parallel and orthogonal histograms use different binning");
    }
    Ok(())
}

/// `V = 1 − A∥(0)/A⊥(0)` with central areas integrated over one MZI delay
/// centered at zero delay; Poisson errors.
pub fn visibility_from_histograms(
    parallel: &CorrelationHistogram,
    orthogonal: &CorrelationHistogram,
    structure: &RepStructure,
) -> Result<Visibility> {
    check_pair(parallel, orthogonal)?;
    let half = 0.5 * structure.mzi_delay;
    let par = parallel.integrate(-half, half) as f64;
    let orth = orthogonal.integrate(-half, half) as f64;
    let s_par = if par > 0.0 { libm::sqrt(par) } else { 1.0 };
    ratio_visibility(par, s_par, orth, libm::sqrt(orth))
}

/// Least-squares peak areas: every peak of `structure` reaching into the
/// histogram gets an amplitude multiplying `shape`, plus a flat background.
/// Three passes, later ones weighted by the previous model (Poisson variance).
pub fn fit_peak_areas(
    histogram: &CorrelationHistogram,
    structure: &RepStructure,
    shape: &PeakShape,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (lo, hi) = histogram.delay_range();
    let margin = 25.0 * shape.lifetime + 4.0 * shape.jitter_fwhm;
    let delays = histogram.delays();
    let bw = histogram.bin_width();
    let all = structure.peak_positions(lo - margin, hi + margin);
    let positions: Vec<f64> = all.iter().copied().filter(|&p| p >= lo && p <= hi).collect();
    // peaks centered outside the range only show exponential tails, which
    // are collinear; each side gets one summed column
    let left: Vec<f64> = all.iter().copied().filter(|&p| p < lo).collect();
    let right: Vec<f64> = all.iter().copied().filter(|&p| p > hi).collect();
    let tails: Vec<Vec<f64>> = [left, right]
        .into_iter()
        .filter(|side| {
            let mass: f64 = delays.iter().map(|&d| side.iter().map(|&p| shape.density(d - p)).sum::<f64>() * bw).sum();
            mass >= 1e-3
        })
        .collect();
    let n_peaks = positions.len();
    let n_params = n_peaks + tails.len() + 1;
    let mut design = vec![0.0; delays.len() * n_params];
    for (i, &d) in delays.iter().enumerate() {
        let row = &mut design[i * n_params..(i + 1) * n_params];
        for (m, &p) in positions.iter().enumerate() {
            if libm::fabs(d - p) < margin {
                row[m] = shape.density(d - p) * bw;
            }
        }
        for (t, side) in tails.iter().enumerate() {
            row[n_peaks + t] = side.iter().map(|&p| shape.density(d - p)).sum::<f64>() * bw;
        }
        row[n_params - 1] = 1.0;
    }
    let y: Vec<f64> = histogram.counts.iter().map(|&c| c as f64).collect();
    let mut weights = vec![1.0; y.len()];
    let mut solution = None;
    for _ in 0..3 {
        let (x, cov) = linalg::weighted_least_squares(&design, n_params, &y, &weights)
            .ok_or_else(|| Error::InvalidArgument("peak-area fit is singular".to_string()))?;
        for (i, w) in weights.iter_mut().enumerate() {
            let model: f64 = design[i * n_params..(i + 1) * n_params].iter().zip(&x).map(|(a, b)| a * b).sum();
            *w = 1.0 / model.max(1.0);
        }
        solution = Some((x, cov));
    }
    let (x, cov) = solution.expect("at least one pass");
    let errors = (0..n_peaks).map(|m| libm::sqrt(cov[m * n_params + m].max(0.0))).collect();
    Ok((positions, x[..n_peaks].to_vec(), errors))
}

/// Visibility from template-fitted central peak areas; removes the
/// overlap of neighbouring peaks that biases fixed-window integration.
pub fn visibility_from_histograms_fitted(
    parallel: &CorrelationHistogram,
    orthogonal: &CorrelationHistogram,
    structure: &RepStructure,
    shape: &PeakShape,
) -> Result<Visibility> {
    check_pair(parallel, orthogonal)?;
    let central = |h: &CorrelationHistogram| -> Result<(f64, f64)> {
        let (pos, areas, errs) = fit_peak_areas(h, structure, shape)?;
        let m = pos
            .iter()
            .enumerate()
            .min_by(|a, b| libm::fabs(*a.1).total_cmp(&libm::fabs(*b.1)))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidArgument("histogram does not contain zero delay".to_string()))?;
        Ok((areas[m].max(0.0), errs[m]))
    };
    let (par, s_par) = central(parallel)?;
    let (orth, s_orth) = central(orthogonal)?;
    ratio_visibility(par, s_par, orth, s_orth)
}

/// Settings of the simulated two-photon interference experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomSetup {
    pub mzi_delay: f64,
    pub detector: DetectorModel,
    pub bin_width: f64,
    pub max_delay: f64,
    /// Radiative lifetime used for the peak template.
    pub lifetime: f64,
}

impl HomSetup {
    pub fn new(mzi_delay: f64, lifetime: f64) -> Self {
        Self {
            mzi_delay,
            detector: DetectorModel::high_efficiency_spad(),
            bin_width: 50e-12,
            max_delay: 30e-9,
            lifetime,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TPIResult {
    /// Template-fitted visibility.
    pub visibility: Visibility,
    /// Fixed-window visibility (one MZI delay around zero).
    pub window_visibility: Visibility,
    pub parallel_histogram: CorrelationHistogram,
    pub orthogonal_histogram: CorrelationHistogram,
    pub mzi_delay: f64,
    pub rep_period: f64,
}

fn parse_schedule(stream: &TagStream) -> Result<(f64, Vec<f64>)> {
    let meta = stream.metadata();
    let rep: f64 = meta
        .get("rep_rate_Hz")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Configuration("stream does not record its repetition rate".to_string()))?;
    let offsets: Vec<f64> = meta
        .get("pulse_offsets_s")
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .ok_or_else(|| Error::Configuration("stream does not record its pulse offsets".to_string()))?;
    Ok((1.0 / rep, offsets))
}

/// Routes the photons of a double-pulse truth stream through the MZI and
/// returns the detected two-port stream.
pub fn mzi_output(stream: &TagStream, mzi_delay: f64, polarization: Polarization, seed: u64) -> Result<TagStream> {
    let (Some(freq), Some(deph), Some(exc)) =
        (stream.truth_frequencies(), stream.truth_dephasing_rates(), stream.excitation_times())
    else {
        bail!(InvalidArgument, "HOM simulation needs truth frequencies, dephasing rates and excitation times");
    };
    let (period, offsets) = parse_schedule(stream)?;
    if offsets.len() != 2 || libm::fabs((offsets[1] - offsets[0]) - mzi_delay) > 1.5e-12 {
        bail!(
            Configuration,
            "MZI delay {mzi_delay} s does not match the pulse separation {:?}",
            offsets.windows(2).map(|w| w[1] - w[0]).next()
        );
    }
    let decay_rate = stream
        .metadata()
        .get("lifetime_s")
        .and_then(|v| v.parse::<f64>().ok())
        .map(|t| 1.0 / t)
        .ok_or_else(|| Error::Configuration("stream does not record the emitter lifetime".to_string()))?;
    let delay_ps = libm::round(mzi_delay * PS_PER_SECOND) as u64;

    let mut rng = rng::seeded(seed);
    let n = stream.len();
    let long: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut port: Vec<u8> = (0..n).map(|_| rng.random::<bool>() as u8).collect();

    // group photons by excitation pulse; pair the first photon of an early
    // pulse with the first photon of the pulse one MZI delay later
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (exc[i], i));
    let is_early = |e: u64| -> bool {
        let phase = libm::fmod(e as f64 / PS_PER_SECOND - offsets[0], period);
        let phase = if phase < 0.0 { phase + period } else { phase };
        libm::fabs(phase) < 0.5 * mzi_delay || libm::fabs(phase - period) < 0.5 * mzi_delay
    };
    let mut k = 0;
    let mut partner = 0;
    while k < n {
        let i = order[k];
        let e = exc[i];
        let mut next = k + 1;
        while next < n && exc[order[next]] == e {
            next += 1;
        }
        if is_early(e) {
            let target = e + delay_ps;
            partner = partner.max(next);
            while partner < n && exc[order[partner]] + 2 < target {
                partner += 1;
            }
            if partner < n && exc[order[partner]] <= target + 2 {
                let j = order[partner];
                if long[i] && !long[j] && polarization == Polarization::Parallel {
                    let v = pair_visibility(&PairKernelParams {
                        decay_rate,
                        dephasing_a: deph[i],
                        dephasing_b: deph[j],
                        detuning: freq[i] - freq[j],
                    });
                    if rng.random::<f64>() < v {
                        port[j] = port[i];
                    }
                }
            }
        }
        k = next;
    }

    let ts = stream.timestamps();
    let mut tags: Vec<(u64, u8)> = (0..n).map(|i| (ts[i] + if long[i] { delay_ps } else { 0 }, port[i])).collect();
    tags.sort_unstable();
    let (times, channels): (Vec<u64>, Vec<u8>) = tags.into_iter().unzip();
    let mut out = TagStream::from_columns(
        channels,
        times,
        None,
        stream.duration() + delay_ps,
        vec!["port_a".to_string(), "port_b".to_string()],
    )?;
    out.replace_metadata(stream.metadata().clone());
    out.set_metadata("creation_op", "mzi_output");
    Ok(out)
}

/// One polarization setting: MZI routing, detection and port correlation.
pub fn hom_histogram(
    stream: &TagStream,
    setup: &HomSetup,
    polarization: Polarization,
    seed: u64,
) -> Result<CorrelationHistogram> {
    let ports = mzi_output(stream, setup.mzi_delay, polarization, derive_seed(seed, 1))?;
    let detected = apply_detector(&ports, &setup.detector, derive_seed(seed, 2))?;
    let spec = HistogramSpec::symmetric(setup.bin_width, setup.max_delay)?;
    correlate(&detected, ChannelSet::single(0), ChannelSet::single(1), spec)
}

/// Seeds of the parallel and orthogonal runs of [`hom_simulate`].
pub fn hom_seeds(seed: u64) -> (u64, u64) {
    (derive_seed(seed, 10), derive_seed(seed, 11))
}

/// Repetition period recorded in a simulated stream.
pub fn stream_rep_period(stream: &TagStream) -> Result<f64> {
    parse_schedule(stream).map(|(period, _)| period)
}

/// Visibilities from a pair of HOM histograms.
pub fn tpi_result(
    setup: &HomSetup,
    rep_period: f64,
    parallel: CorrelationHistogram,
    orthogonal: CorrelationHistogram,
) -> Result<TPIResult> {
    let structure = RepStructure { rep_period, mzi_delay: setup.mzi_delay };
    let shape = PeakShape { lifetime: setup.lifetime, jitter_fwhm: setup.detector.jitter_fwhm };
    let visibility = visibility_from_histograms_fitted(&parallel, &orthogonal, &structure, &shape)?;
    let window_visibility = visibility_from_histograms(&parallel, &orthogonal, &structure)?;
    Ok(TPIResult {
        visibility,
        window_visibility,
        parallel_histogram: parallel,
        orthogonal_histogram: orthogonal,
        mzi_delay: setup.mzi_delay,
        rep_period,
    })
}

/// Simulated HOM experiment: parallel and orthogonal runs on the same
/// emitted photons with independent routing and detection randomness.
pub fn hom_simulate(stream: &TagStream, setup: &HomSetup, seed: u64) -> Result<TPIResult> {
    let period = stream_rep_period(stream)?;
    let (s_par, s_orth) = hom_seeds(seed);
    let parallel = hom_histogram(stream, setup, Polarization::Parallel, s_par)?;
    let orthogonal = hom_histogram(stream, setup, Polarization::Orthogonal, s_orth)?;
    tpi_result(setup, period, parallel, orthogonal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(decay: f64, ga: f64, gb: f64, d: f64) -> PairKernelParams {
        PairKernelParams { decay_rate: decay, dephasing_a: ga, dephasing_b: gb, detuning: d }
    }

    #[test]
    fn kernel_limits() {
        let g = 1.0 / 652e-12;
        assert_eq!(pair_visibility(&k(g, 0.0, 0.0, 0.0)), 1.0);
        assert!((pair_visibility(&k(g, 0.0, 0.0, g / (2.0 * PI))) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn numerical_oracle_agrees_on_fixed_points() {
        let g = 1.0 / 652e-12;
        for p in [k(g, 0.0, 0.0, 0.0), k(g, 0.3 * g, 0.1 * g, 0.2 * g), k(g, 0.0, 0.0, 0.5 * g)] {
            let exact = pair_visibility(&p);
            let num = pair_visibility_numerical(&p, 1200);
            assert!((exact - num).abs() < 1e-3, "{p:?}: {exact} vs {num}");
        }
    }

    #[test]
    fn gaussian_average_matches_quadrature() {
        let g = 1.0 / 652e-12;
        let var = (150e6f64).powi(2);
        let closed = gaussian_averaged_visibility(g, 1e8, var);
        let sd = libm::sqrt(var);
        let mut sum = 0.0;
        let mut norm = 0.0;
        for i in -8000..=8000 {
            let d = i as f64 * 1e-3 * sd;
            let w = libm::exp(-0.5 * (d / sd).powi(2));
            sum += w * pair_visibility(&k(g, 0.5e8, 0.5e8, d));
            norm += w;
        }
        assert!((closed - sum / norm).abs() < 1e-9, "{closed} {}", sum / norm);
    }

    #[test]
    fn peak_shape_has_unit_area() {
        let shape = PeakShape { lifetime: 652e-12, jitter_fwhm: 350e-12 };
        let h = 5e-12;
        let area: f64 = (-4000..=4000).map(|i| shape.density(i as f64 * h) * h).sum();
        assert!((area - 1.0).abs() < 1e-4, "{area}");
        let bare = PeakShape { lifetime: 652e-12, jitter_fwhm: 0.0 };
        assert!((bare.density(0.0) - 0.5 / 652e-12).abs() < 1.0);
    }

    #[test]
    fn window_visibility_arithmetic() {
        let spec = HistogramSpec::symmetric(1e-9, 5e-9).unwrap();
        let mk = |central: u64| {
            let mut counts = vec![0u64; spec.n_bins];
            counts[spec.n_bins / 2] = central;
            CorrelationHistogram {
                spec,
                counts,
                normalization: crate::correlator::Normalization::Raw,
                counts_a: 1,
                counts_b: 1,
                duration_ps: 1,
                empty_channels: false,
            }
        };
        let s = RepStructure { rep_period: 13e-9, mzi_delay: 2e-9 };
        let v = visibility_from_histograms(&mk(29), &mk(200), &s).unwrap();
        assert!((v.value - 0.855).abs() < 1e-12);
        let expect = 29.0 / 200.0 * libm::sqrt(1.0 / 29.0 + 1.0 / 200.0);
        assert!((v.uncertainty - expect).abs() < 1e-12);
        assert_eq!(visibility_from_histograms(&mk(0), &mk(200), &s).unwrap().value, 1.0);
        assert_eq!(visibility_from_histograms(&mk(50), &mk(50), &s).unwrap().value, 0.0);
        assert!(matches!(visibility_from_histograms(&mk(5), &mk(0), &s), Err(Error::UndefinedVisibility(_))));
    }

    #[test]
    fn peak_positions_merge_and_cover() {
        let s = RepStructure { rep_period: 10e-9, mzi_delay: 5e-9 };
        let p = s.peak_positions(-10e-9, 10e-9);
        assert_eq!(p.len(), 5);
    }
}
