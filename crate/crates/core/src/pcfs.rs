//! Photon-correlation Fourier spectroscopy.
//!
//! Each photon passes a Mach-Zehnder interferometer with optical path
//! difference `opd` whose phase is dithered linearly in time. For photon
//! pairs separated by `τ` the port cross-correlation
//! `C = 2(1 − 2 N_cross / N_all)`, corrected for the dither phase advance
//! over `τ`, equals `E[κᵢκⱼ cos(2π(νᵢ − νⱼ)·opd/c)]`. Its cosine transform
//! over the scanned path differences is the spectral correlation `p(ζ; τ)`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::emitter::{simulate, EmitterConfig, Excitation};
use crate::error::{bail, Error, Result};
use crate::lm;
use crate::photon::{TagStream, PS_PER_SECOND};
use crate::rng::{self, derive_seed};
use crate::spectroscopy::Spectrum;
use crate::SPEED_OF_LIGHT;

/// Pairs per τ bin below which a bin is flagged.
pub const MIN_PAIRS: u64 = 10_000;
/// Relative rms residual of the Lorentzian fit above which a bin is flagged.
pub const MISFIT_THRESHOLD: f64 = 0.05;

/// Log-spaced bin edges with `per_decade` bins per decade.
pub fn log_tau_edges(start: f64, stop: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(start > 0.0) || !(stop > start) || per_decade == 0 {
        bail!(InvalidArgument, "log edges need 0 < start < stop and per_decade > 0");
    }
    let decades = libm::log10(stop / start);
    let n = libm::round(decades * per_decade as f64).max(1.0) as usize;
    Ok((0..=n).map(|k| start * libm::pow(10.0, decades * k as f64 / n as f64)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PCFSScanConfig {
    pub max_opd: f64,
    pub opd_step: f64,
    /// Dither rate, fringes per second.
    pub dither_rate: f64,
    pub tau_edges: Vec<f64>,
    /// Acquisition per stage position, s; a whole number of half fringe periods.
    pub acquisition_time: f64,
    /// Instrument fringe contrast κ.
    pub contrast: f64,
    pub collection_efficiency: f64,
    pub rep_rate: f64,
}

impl Default for PCFSScanConfig {
    fn default() -> Self {
        Self {
            max_opd: 0.372,
            opd_step: 0.004,
            dither_rate: 10.0,
            tau_edges: log_tau_edges(10e-9, 10e-3, 5).expect("valid default edges"),
            acquisition_time: 0.05,
            contrast: 1.0,
            collection_efficiency: 0.1,
            rep_rate: crate::calibration::PCFS_REP_RATE,
        }
    }
}

impl PCFSScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.opd_step > 0.0) || !(self.opd_step <= self.max_opd) {
            bail!(Configuration, "need 0 < opd_step <= max_opd");
        }
        if self.tau_edges.len() < 2
            || !(self.tau_edges[0] > 0.0)
            || self.tau_edges.windows(2).any(|w| !(w[1] > w[0]))
        {
            bail!(Configuration, "tau edges must be positive and strictly increasing");
        }
        if !(self.dither_rate > 0.0) {
            bail!(Configuration, "dither_rate must be positive");
        }
        let halves = 2.0 * self.acquisition_time * self.dither_rate;
        if !(halves >= 1.0) || libm::fabs(halves - libm::round(halves)) > 1e-9 * halves {
            bail!(
                Configuration,
                "acquisition_time {} s is not a whole number of half fringe periods",
                self.acquisition_time
            );
        }
        if !(0.0..=1.0).contains(&self.contrast) || !(self.collection_efficiency > 0.0 && self.collection_efficiency <= 1.0) {
            bail!(Configuration, "contrast must be in [0, 1] and collection_efficiency in (0, 1]");
        }
        if !(self.rep_rate > 0.0) {
            bail!(Configuration, "rep_rate must be positive");
        }
        Ok(())
    }

    pub fn positions(&self) -> usize {
        libm::floor(self.max_opd / self.opd_step + 1e-9) as usize + 1
    }

    pub fn opds(&self) -> Vec<f64> {
        (0..self.positions()).map(|k| k as f64 * self.opd_step).collect()
    }

    /// Shortest whole number of half fringe periods giving `min_pairs` pairs
    /// in the narrowest τ bin at `detected_rate` photons/s.
    pub fn acquisition_for_pairs(&self, detected_rate: f64, min_pairs: u64) -> f64 {
        let narrowest = self.tau_edges.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let t = min_pairs as f64 / (detected_rate * detected_rate * narrowest);
        let half = 0.5 / self.dither_rate;
        libm::ceil(t / half).max(1.0) * half
    }

    fn n_bins(&self) -> usize {
        self.tau_edges.len() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcfsGrid {
    pub resolution: f64,
    pub range: f64,
    pub positions: usize,
}

pub fn pcfs_grid(config: &PCFSScanConfig) -> PcfsGrid {
    PcfsGrid {
        resolution: SPEED_OF_LIGHT / config.max_opd,
        range: SPEED_OF_LIGHT / (2.0 * config.opd_step),
        positions: config.positions(),
    }
}

/// Bin average of `cos(2π f τ)` for pairs uniformly spread over `[lo, hi)`.
pub fn dither_factor(dither_rate: f64, lo: f64, hi: f64) -> f64 {
    let w = 2.0 * PI * dither_rate;
    if w * (hi - lo) < 1e-12 {
        return libm::cos(w * lo);
    }
    (libm::sin(w * hi) - libm::sin(w * lo)) / (w * (hi - lo))
}

/// Cross-correlation contrast of one stage position, per τ bin.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeContrast {
    pub opd: f64,
    pub contrast: Vec<f64>,
    pub uncertainty: Vec<f64>,
    pub pairs: Vec<u64>,
    pub cross_pairs: Vec<u64>,
}

fn lifetime_of(stream: &TagStream) -> Option<f64> {
    stream.metadata().get("lifetime_s").and_then(|v| v.parse().ok())
}

/// Routes the photons of a truth stream through the dithered interferometer
/// and measures the port anticorrelation per τ bin.
///
/// Photons carry homogeneous coherence `e^{−(Γ/2 + γ)·opd/c}`; when the
/// stream records no lifetime only the dephasing term is used.
pub fn mzi_dither_correlate(stream: &TagStream, opd: f64, config: &PCFSScanConfig, seed: u64) -> Result<FringeContrast> {
    config.validate()?;
    let (Some(freq), Some(deph)) = (stream.truth_frequencies(), stream.truth_dephasing_rates()) else {
        bail!(InvalidArgument, "PCFS needs a stream with truth frequencies and dephasing rates");
    };
    if !(opd >= 0.0) {
        bail!(InvalidArgument, "opd must be non-negative");
    }
    let delta = opd / SPEED_OF_LIGHT;
    let half_decay = lifetime_of(stream).map_or(0.0, |t| 0.5 / t);
    let mut rng = rng::seeded(seed);
    let phi0 = rng.random::<f64>() * 2.0 * PI;
    let ts = stream.timestamps();
    let n = ts.len();

    let mut cum_b = Vec::with_capacity(n + 1);
    let mut port_b = Vec::with_capacity(n);
    cum_b.push(0u32);
    for i in 0..n {
        let t = ts[i] as f64 / PS_PER_SECOND;
        let kappa = config.contrast * libm::exp(-(half_decay + deph[i]) * delta);
        let theta = 2.0 * PI * (freq[i] * delta + config.dither_rate * t) + phi0;
        let p_a = 0.5 * (1.0 + kappa * libm::cos(theta));
        let b = rng.random::<f64>() >= p_a;
        port_b.push(b);
        cum_b.push(cum_b[i] + b as u32);
    }

    let edges: Vec<u64> = config.tau_edges.iter().map(|&e| libm::round(e * PS_PER_SECOND) as u64).collect();
    let n_bins = config.n_bins();
    let mut pointer = vec![0usize; edges.len()];
    let mut pairs = vec![0u64; n_bins];
    let mut cross = vec![0u64; n_bins];
    for i in 0..n {
        for (p, &e) in pointer.iter_mut().zip(&edges) {
            let target = ts[i] + e;
            while *p < n && ts[*p] < target {
                *p += 1;
            }
        }
        for b in 0..n_bins {
            let (lo, hi) = (pointer[b], pointer[b + 1]);
            let all = (hi - lo) as u64;
            let in_b = (cum_b[hi] - cum_b[lo]) as u64;
            pairs[b] += all;
            cross[b] += if port_b[i] { all - in_b } else { in_b };
        }
    }

    let mut contrast = Vec::with_capacity(n_bins);
    let mut uncertainty = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let factor = dither_factor(config.dither_rate, config.tau_edges[b], config.tau_edges[b + 1]);
        if pairs[b] == 0 {
            contrast.push(0.0);
            uncertainty.push(f64::INFINITY);
            continue;
        }
        let f = cross[b] as f64 / pairs[b] as f64;
        contrast.push(2.0 * (1.0 - 2.0 * f) / factor);
        uncertainty.push(4.0 * libm::sqrt((f * (1.0 - f)).max(0.25 / pairs[b] as f64) / pairs[b] as f64) / libm::fabs(factor));
    }
    Ok(FringeContrast { opd, contrast, uncertainty, pairs, cross_pairs: cross })
}

/// Contrasts on the full path-difference grid, indexed `[τ bin][position]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastMatrix {
    pub opd: Vec<f64>,
    pub tau_edges: Vec<f64>,
    pub contrast: Vec<Vec<f64>>,
    pub uncertainty: Vec<Vec<f64>>,
    pub pairs: Vec<Vec<u64>>,
}

impl ContrastMatrix {
    pub fn from_positions(tau_edges: Vec<f64>, mut positions: Vec<FringeContrast>) -> Result<Self> {
        positions.sort_by(|a, b| a.opd.total_cmp(&b.opd));
        let n_bins = tau_edges.len().saturating_sub(1);
        if n_bins == 0 || positions.iter().any(|p| p.contrast.len() != n_bins) {
            bail!(InvalidArgument, "contrast vectors do not match the τ bins");
        }
        let opd: Vec<f64> = positions.iter().map(|p| p.opd).collect();
        let pick = |f: &dyn Fn(&FringeContrast, usize) -> f64| -> Vec<Vec<f64>> {
            (0..n_bins).map(|b| positions.iter().map(|p| f(p, b)).collect()).collect()
        };
        let contrast = pick(&|p, b| p.contrast[b]);
        let uncertainty = pick(&|p, b| p.uncertainty[b]);
        let pairs = (0..n_bins).map(|b| positions.iter().map(|p| p.pairs[b]).collect()).collect();
        let m = Self { opd, tau_edges, contrast, uncertainty, pairs };
        m.check_grid()?;
        Ok(m)
    }

    /// Matrix from a contrast function `c(opd, τ bin)` with no noise.
    pub fn from_fn(opd: Vec<f64>, tau_edges: Vec<f64>, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let n_bins = tau_edges.len().saturating_sub(1);
        let contrast = (0..n_bins).map(|b| opd.iter().map(|&x| f(x, b)).collect()).collect();
        let uncertainty = vec![vec![0.0; opd.len()]; n_bins];
        let pairs = vec![vec![u64::MAX; opd.len()]; n_bins];
        let m = Self { opd, tau_edges, contrast, uncertainty, pairs };
        m.check_grid()?;
        Ok(m)
    }

    fn check_grid(&self) -> Result<()> {
        if self.opd.len() < 2 || self.opd[0] != 0.0 {
            bail!(InvalidArgument, "path-difference grid must start at zero and have at least two points");
        }
        let step = self.opd[1];
        if !(step > 0.0) || self.opd.iter().enumerate().any(|(k, &x)| libm::fabs(x - k as f64 * step) > 1e-9 * step) {
            bail!(InvalidArgument, "path-difference grid must be uniform");
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.contrast.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCorrelation {
    pub zeta: Vec<f64>,
    /// `p(ζ)` per τ bin, unit area.
    pub values: Vec<Vec<f64>>,
    pub tau_edges: Vec<f64>,
    pub resolution: f64,
    pub range: f64,
    /// Smallest pair count over positions, per τ bin.
    pub min_pairs: Vec<u64>,
}

impl SpectralCorrelation {
    pub fn bin(&self, b: usize) -> Result<Spectrum> {
        Spectrum::new(self.zeta.clone(), self.values[b].iter().map(|v| v.max(0.0)).collect())
    }

    pub fn tau_centers(&self) -> Vec<f64> {
        self.tau_edges.windows(2).map(|w| libm::sqrt(w[0] * w[1])).collect()
    }
}

/// Cosine transform (trapezoid weights) of each τ bin's contrasts onto a
/// symmetric ζ grid with a quarter-resolution step.
pub fn spectral_correlation(matrix: &ContrastMatrix) -> Result<SpectralCorrelation> {
    matrix.check_grid()?;
    let step = matrix.opd[1];
    let max_opd = *matrix.opd.last().expect("non-empty grid");
    let resolution = SPEED_OF_LIGHT / max_opd;
    let range = SPEED_OF_LIGHT / (2.0 * step);
    let dz = resolution / 4.0;
    let m = libm::floor(range / dz + 1e-9) as i64;
    let zeta: Vec<f64> = (-m..=m).map(|k| k as f64 * dz).collect();
    let n = matrix.opd.len();
    let delays: Vec<f64> = matrix.opd.iter().map(|x| x / SPEED_OF_LIGHT).collect();
    let values = matrix
        .contrast
        .iter()
        .map(|c| {
            let mut p: Vec<f64> = zeta
                .iter()
                .map(|&z| {
                    let mut s = 0.0;
                    for k in 0..n {
                        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                        s += w * c[k] * libm::cos(2.0 * PI * z * delays[k]);
                    }
                    2.0 * s * step / SPEED_OF_LIGHT
                })
                .collect();
            let area: f64 = p.iter().sum::<f64>() * dz;
            if area > 0.0 {
                p.iter_mut().for_each(|v| *v /= area);
            }
            p
        })
        .collect();
    let min_pairs = matrix.pairs.iter().map(|row| row.iter().copied().min().unwrap_or(0)).collect();
    Ok(SpectralCorrelation { zeta, values, tau_edges: matrix.tau_edges.clone(), resolution, range, min_pairs })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BinFlags {
    pub resolution_limited: bool,
    pub misfit: bool,
    pub low_statistics: bool,
}

impl BinFlags {
    pub fn any(&self) -> bool {
        self.resolution_limited || self.misfit || self.low_statistics
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PCFSResult {
    pub voltage: Option<f64>,
    pub tau_edges: Vec<f64>,
    /// Lorentzian-model emission linewidth (fitted FWHM of p(ζ) / 2), Hz.
    pub linewidth: Vec<f64>,
    pub uncertainty: Vec<f64>,
    /// Model-free FWHM of p(ζ) / 2, Hz.
    pub model_free: Vec<f64>,
    pub flags: Vec<BinFlags>,
    pub spectral: SpectralCorrelation,
}

impl PCFSResult {
    pub fn tau_centers(&self) -> Vec<f64> {
        self.spectral.tau_centers()
    }

    fn usable(&self, min_tau: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.tau_centers()
            .into_iter()
            .zip(&self.linewidth)
            .zip(&self.uncertainty)
            .zip(&self.flags)
            .filter(move |(((t, l), u), f)| *t >= min_tau && !f.low_statistics && l.is_finite() && **u > 0.0)
            .map(|(((t, l), u), _)| (t, *l, *u))
    }

    /// Inverse-variance mean linewidth over bins with τ ≥ `min_tau`.
    pub fn level(&self, min_tau: f64) -> Option<(f64, f64)> {
        let (mut sw, mut swl) = (0.0, 0.0);
        for (_, l, u) in self.usable(min_tau) {
            let w = 1.0 / (u * u);
            sw += w;
            swl += w * l;
        }
        (sw > 0.0).then(|| (swl / sw, libm::sqrt(1.0 / sw)))
    }

    /// Weighted slope of linewidth against log10 τ (Hz per decade) with its error.
    pub fn log_slope(&self, min_tau: f64) -> Option<(f64, f64)> {
        let pts: Vec<_> = self.usable(min_tau).collect();
        if pts.len() < 2 {
            return None;
        }
        let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, l, u) in &pts {
            let w = 1.0 / (u * u);
            let x = libm::log10(t);
            s += w;
            sx += w * x;
            sy += w * l;
            sxx += w * x * x;
            sxy += w * x * l;
        }
        let det = s * sxx - sx * sx;
        (det > 0.0).then(|| ((s * sxy - sx * sy) / det, libm::sqrt(s / det)))
    }
}

fn fit_lorentzian(zeta: &[f64], p: &[f64], guess: f64) -> Result<(f64, f64, f64)> {
    let peak = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::FitNonConvergence { iterations: 0, residual_norm: f64::NAN });
    }
    let residuals = |q: &[f64], r: &mut [f64]| {
        for ((ri, &z), &y) in r.iter_mut().zip(zeta).zip(p) {
            let u = 2.0 * z / q[1];
            *ri = q[0] / (1.0 + u * u) + q[2] - y;
        }
    };
    let span = zeta.last().copied().unwrap_or(1.0);
    let sol = lm::minimize(&lm::Problem {
        initial: vec![peak, guess, 0.0],
        lower: vec![0.0, span * 1e-4, -peak],
        upper: vec![10.0 * peak, 4.0 * span, peak],
        scale: vec![peak, guess, peak],
        residuals: &residuals,
        n_residuals: zeta.len(),
    })?;
    let rms = sol.residual_norm / libm::sqrt(zeta.len() as f64);
    Ok((sol.params[1], sol.std_errors[1], rms / sol.params[0].max(f64::MIN_POSITIVE)))
}

/// Lorentzian fit of `p(ζ)` per τ bin; emission linewidth = FWHM / 2.
pub fn linewidth_vs_tau(sc: &SpectralCorrelation) -> Result<PCFSResult> {
    let n_bins = sc.values.len();
    let mut linewidth = Vec::with_capacity(n_bins);
    let mut uncertainty = Vec::with_capacity(n_bins);
    let mut model_free = Vec::with_capacity(n_bins);
    let mut flags = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let observed = Spectrum::new(sc.zeta.clone(), sc.values[b].iter().map(|v| v.max(0.0)).collect())
            .ok()
            .and_then(|s| s.observed_fwhm());
        let free = observed.map_or(f64::NAN, |w| 0.5 * w);
        let guess = observed.unwrap_or(sc.resolution).max(0.25 * sc.resolution);
        let mut flag = BinFlags { low_statistics: sc.min_pairs[b] < MIN_PAIRS, ..BinFlags::default() };
        match fit_lorentzian(&sc.zeta, &sc.values[b], guess) {
            Ok((fwhm, err, rel_rms)) => {
                flag.misfit = rel_rms > MISFIT_THRESHOLD;
                flag.resolution_limited = fwhm < sc.resolution;
                linewidth.push(0.5 * fwhm);
                uncertainty.push(0.5 * err);
            }
            Err(_) => {
                flag.misfit = true;
                flag.resolution_limited = free < 0.5 * sc.resolution;
                linewidth.push(free);
                uncertainty.push(f64::NAN);
            }
        }
        model_free.push(free);
        flags.push(flag);
    }
    Ok(PCFSResult {
        voltage: None,
        tau_edges: sc.tau_edges.clone(),
        linewidth,
        uncertainty,
        model_free,
        flags,
        spectral: sc.clone(),
    })
}

/// Expected contrasts from the truth frequencies of pairs in each τ bin.
///
/// For every `stride`-th photon one partner is drawn uniformly from each τ
/// window and weighted by the window population, which makes the average an
/// unbiased estimate over all pairs.
pub fn truth_contrasts(
    stream: &TagStream,
    opds: &[f64],
    tau_edges: &[f64],
    stride: usize,
    seed: u64,
) -> Result<ContrastMatrix> {
    let (Some(freq), Some(deph)) = (stream.truth_frequencies(), stream.truth_dephasing_rates()) else {
        bail!(InvalidArgument, "the pair-difference oracle needs truth frequencies");
    };
    if tau_edges.len() < 2 {
        bail!(InvalidArgument, "need at least one τ bin");
    }
    let half_decay = lifetime_of(stream).map_or(0.0, |t| 0.5 / t);
    let delays: Vec<f64> = opds.iter().map(|x| x / SPEED_OF_LIGHT).collect();
    let edges: Vec<u64> = tau_edges.iter().map(|&e| libm::round(e * PS_PER_SECOND) as u64).collect();
    let ts = stream.timestamps();
    let n = ts.len();
    let n_bins = edges.len() - 1;
    let mut rng = rng::seeded(seed);
    let mut pointer = vec![0usize; edges.len()];
    let mut sums = vec![vec![0.0; opds.len()]; n_bins];
    let mut weights = vec![0u64; n_bins];
    for i in (0..n).step_by(stride.max(1)) {
        for (p, &e) in pointer.iter_mut().zip(&edges) {
            while *p < n && ts[*p] < ts[i] + e {
                *p += 1;
            }
        }
        for b in 0..n_bins {
            let (lo, hi) = (pointer[b], pointer[b + 1]);
            if hi == lo {
                continue;
            }
            let j = rng.random_range(lo..hi);
            let w = (hi - lo) as u64;
            weights[b] += w;
            let zeta = freq[i] - freq[j];
            let decay = 2.0 * half_decay + deph[i] + deph[j];
            for (s, &d) in sums[b].iter_mut().zip(&delays) {
                *s += w as f64 * libm::exp(-decay * d) * libm::cos(2.0 * PI * zeta * d);
            }
        }
    }
    let contrast = sums
        .into_iter()
        .zip(&weights)
        .map(|(row, &w)| row.into_iter().map(|s| if w > 0 { s / w as f64 } else { 0.0 }).collect())
        .collect();
    let uncertainty = vec![vec![0.0; opds.len()]; n_bins];
    let pairs = weights.iter().map(|&w| vec![w; opds.len()]).collect();
    let m = ContrastMatrix { opd: opds.to_vec(), tau_edges: tau_edges.to_vec(), contrast, uncertainty, pairs };
    m.check_grid()?;
    Ok(m)
}

/// Simulates and correlates stage position `index` at `voltage`.
pub fn pcfs_position(
    config: &PCFSScanConfig,
    emitter: &EmitterConfig,
    voltage: f64,
    index: usize,
    seed: u64,
) -> Result<FringeContrast> {
    let emitter = EmitterConfig { rep_rate: config.rep_rate, ..emitter.clone() };
    let excitation = Excitation::single(PI).with_collection_efficiency(config.collection_efficiency);
    let stream = simulate(&emitter, voltage, &excitation, config.acquisition_time, derive_seed(seed, 2 * index as u64))?;
    mzi_dither_correlate(&stream, index as f64 * config.opd_step, config, derive_seed(seed, 2 * index as u64 + 1))
}

/// Transform and fit of a complete set of stage positions.
pub fn pcfs_assemble(config: &PCFSScanConfig, voltage: Option<f64>, positions: Vec<FringeContrast>) -> Result<PCFSResult> {
    if positions.len() != config.positions() {
        bail!(InvalidArgument, "expected {} stage positions, got {}", config.positions(), positions.len());
    }
    let matrix = ContrastMatrix::from_positions(config.tau_edges.clone(), positions)?;
    let sc = spectral_correlation(&matrix)?;
    let mut result = linewidth_vs_tau(&sc)?;
    result.voltage = voltage;
    Ok(result)
}

/// Seed used for the voltage with index `k` in [`pcfs_run`].
pub fn voltage_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, 0x5043_4653_0000 + k as u64)
}

/// Full PCFS pipeline, one linewidth-vs-τ curve per voltage.
pub fn pcfs_run(config: &PCFSScanConfig, emitter: &EmitterConfig, voltages: &[f64], seed: u64) -> Result<Vec<PCFSResult>> {
    config.validate()?;
    emitter.validate()?;
    if voltages.is_empty() {
        return Err(Error::InvalidArgument("no voltages given".to_string()));
    }
    voltages
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let s = voltage_seed(seed, k);
            let positions = (0..config.positions())
                .map(|i| pcfs_position(config, emitter, v, i, s))
                .collect::<Result<Vec<_>>>()?;
            pcfs_assemble(config, Some(v), positions)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_matches_closed_form() {
        let g = pcfs_grid(&PCFSScanConfig::default());
        assert_eq!(g.positions, 94);
        assert!((g.resolution - 805.92e6).abs() < 0.1e6, "{}", g.resolution);
        assert!((g.range - 37.474e9).abs() < 1e6, "{}", g.range);
    }

    #[test]
    fn default_tau_edges_are_five_per_decade() {
        let e = PCFSScanConfig::default().tau_edges;
        assert_eq!(e.len(), 31);
        assert!((e[0] - 10e-9).abs() < 1e-20 && (e[30] - 10e-3).abs() < 1e-15);
        assert!((e[5] / e[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_partial_fringes() {
        let c = PCFSScanConfig { acquisition_time: 0.07, ..PCFSScanConfig::default() };
        assert!(matches!(c.validate(), Err(Error::Configuration(_))));
    }

    #[test]
    fn dither_factor_limits() {
        assert!((dither_factor(10.0, 0.0, 1e-12) - 1.0).abs() < 1e-12);
        let f = dither_factor(10.0, 0.0, 0.025);
        assert!((f - 2.0 / PI).abs() < 1e-12, "{f}");
        assert!(dither_factor(10.0, 0.0, 0.1).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_contrast_gives_double_width() {
        let cfg = PCFSScanConfig::default();
        for w in [0.5e9, 1e9, 2e9] {
            let m = ContrastMatrix::from_fn(cfg.opds(), vec![1e-6, 1e-5], |x, _| libm::exp(-2.0 * PI * w * x / SPEED_OF_LIGHT))
                .unwrap();
            let r = linewidth_vs_tau(&spectral_correlation(&m).unwrap()).unwrap();
            assert!((r.linewidth[0] / w - 1.0).abs() < 0.05, "{w}: {}", r.linewidth[0]);
        }
    }

    #[test]
    fn constant_contrast_is_resolution_limited() {
        let cfg = PCFSScanConfig::default();
        let m = ContrastMatrix::from_fn(cfg.opds(), vec![1e-6, 1e-5], |_, _| 1.0).unwrap();
        let sc = spectral_correlation(&m).unwrap();
        let mid = sc.zeta.len() / 2;
        assert_eq!(sc.zeta[mid], 0.0);
        let p = &sc.values[0];
        assert!(p.iter().all(|&v| v <= p[mid]));
        for k in 0..sc.zeta.len() {
            assert_eq!(p[k], p[sc.zeta.len() - 1 - k]);
        }
        let r = linewidth_vs_tau(&sc).unwrap();
        assert!(r.flags[0].resolution_limited);
    }

    #[test]
    fn white_fringe_gives_full_anticorrelation() {
        let n = 16_666u64;
        let tags: Vec<_> = (0..n).map(|i| crate::photon::PhotonTag::with_truth(0, i * 3_000_000, 1e8, 0.0)).collect();
        let stream = TagStream::from_tags(&tags, 50_000_000_000, vec!["emitter".into()]).unwrap();
        let cfg = PCFSScanConfig {
            tau_edges: vec![1e-6, 1e-5, 1e-4],
            acquisition_time: 0.05,
            ..PCFSScanConfig::default()
        };
        let c = mzi_dither_correlate(&stream, 0.0, &cfg, 1).unwrap();
        for (v, u) in c.contrast.iter().zip(&c.uncertainty) {
            assert!((v - 1.0).abs() < 4.0 * u + 0.02, "{v} ± {u}");
        }
    }
}
