//! Stationary spectra, the scanning Fabry-Perot interferometer and
//! Voigt⊗SR lineshape fitting.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, Poisson};

use crate::error::{bail, Result};
use crate::lm;
use crate::photon::{TagStream, GAUSSIAN_FWHM_PER_SIGMA};
use crate::rng;

pub use crate::voigt::voigt_profile;

/// Intensity on a uniform, strictly increasing detuning grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    detuning: Vec<f64>,
    intensity: Vec<f64>,
    /// FWHM of the instrument response the spectrum was measured with, Hz.
    pub sr_fwhm: Option<f64>,
    pub fsr: Option<f64>,
}

impl Spectrum {
    pub fn new(detuning: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        if detuning.len() != intensity.len() || detuning.len() < 2 {
            bail!(InvalidArgument, "spectrum needs matching grid and intensity of length >= 2");
        }
        let step = detuning[1] - detuning[0];
        if !(step > 0.0) {
            bail!(InvalidArgument, "detuning grid must be strictly increasing");
        }
        for w in detuning.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || libm::fabs(d - step) > 1e-6 * step {
                bail!(InvalidArgument, "detuning grid must be uniform and strictly increasing");
            }
        }
        if intensity.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            bail!(InvalidArgument, "spectrum intensity must be finite and non-negative");
        }
        Ok(Self { detuning, intensity, sr_fwhm: None, fsr: None })
    }

    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.to_vec(), grid.iter().map(|&x| f(x)).collect())
    }

    pub fn detuning(&self) -> &[f64] {
        &self.detuning
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn step(&self) -> f64 {
        self.detuning[1] - self.detuning[0]
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }

    /// Riemann-sum area.
    pub fn area(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.step()
    }

    pub fn peak(&self) -> (f64, f64) {
        let (i, v) = self
            .intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        (self.detuning[i], *v)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = Self::new(self.detuning.clone(), self.intensity.iter().map(|v| v * factor).collect())?;
        out.sr_fwhm = self.sr_fwhm;
        out.fsr = self.fsr;
        Ok(out)
    }

    fn normalized_to_peak(mut self) -> Self {
        let (_, peak) = self.peak();
        if peak > 0.0 {
            self.intensity.iter_mut().for_each(|v| *v /= peak);
        }
        self
    }

    /// Full width at half maximum from linear interpolation of the
    /// outermost half-maximum crossings around the peak.
    pub fn observed_fwhm(&self) -> Option<f64> {
        let (i_peak, &peak) =
            self.intensity.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        let floor = self.intensity.iter().copied().fold(f64::INFINITY, f64::min);
        let half = floor + 0.5 * (peak - floor);
        let mut left = None;
        for i in (0..i_peak).rev() {
            if self.intensity[i] < half {
                let (x0, x1) = (self.detuning[i], self.detuning[i + 1]);
                let (y0, y1) = (self.intensity[i], self.intensity[i + 1]);
                left = Some(x0 + (half - y0) / (y1 - y0) * (x1 - x0));
                break;
            }
        }
        let mut right = None;
        for i in i_peak + 1..self.len() {
            if self.intensity[i] < half {
                let (x0, x1) = (self.detuning[i - 1], self.detuning[i]);
                let (y0, y1) = (self.intensity[i - 1], self.intensity[i]);
                right = Some(x0 + (half - y0) / (y1 - y0) * (x1 - x0));
                break;
            }
        }
        Some(right? - left?)
    }
}

/// Uniform grid from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop > start) {
        bail!(InvalidArgument, "grid needs step > 0 and stop > start");
    }
    let n = libm::floor((stop - start) / step + 1e-9) as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

pub fn ft_limit(lifetime: f64) -> Result<f64> {
    if !(lifetime > 0.0) {
        bail!(InvalidArgument, "lifetime must be positive, got {lifetime}");
    }
    Ok(1.0 / (2.0 * PI * lifetime))
}

pub fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    g / (PI * (x * x + g * g))
}

pub fn gaussian(x: f64, fwhm: f64) -> f64 {
    let s = fwhm / GAUSSIAN_FWHM_PER_SIGMA;
    libm::exp(-0.5 * x * x / (s * s)) / (s * libm::sqrt(2.0 * PI))
}

/// FWHM of the Lorentzian⊗Gaussian convolution, by bisection on the profile.
pub fn voigt_fwhm(lorentzian_fwhm: f64, gaussian_fwhm: f64) -> f64 {
    let l = lorentzian_fwhm.max(0.0);
    let g = gaussian_fwhm.max(0.0);
    let scale = l + g;
    if scale == 0.0 {
        return 0.0;
    }
    if g == 0.0 {
        return l;
    }
    if l == 0.0 {
        return g;
    }
    let (ln, gn) = (l / scale, g / scale);
    let half = 0.5 * voigt_profile(0.0, ln, gn);
    let (mut lo, mut hi) = (0.0, 0.5 * 1.000_001);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if voigt_profile(mid, ln, gn) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    (lo + hi) * scale
}

/// Olivero-Longbothum approximation of the Voigt FWHM (about 0.02 % accurate).
pub fn voigt_fwhm_approx(lorentzian_fwhm: f64, gaussian_fwhm: f64) -> f64 {
    let l = lorentzian_fwhm;
    0.5346 * l + libm::sqrt(0.2166 * l * l + gaussian_fwhm * gaussian_fwhm)
}

/// Gaussian FWHM that, combined with `lorentzian_fwhm`, yields `total_fwhm`.
pub fn gaussian_fwhm_for_total(lorentzian_fwhm: f64, total_fwhm: f64) -> Result<f64> {
    if !(lorentzian_fwhm >= 0.0) || !(total_fwhm >= lorentzian_fwhm) {
        bail!(InvalidArgument, "total FWHM {total_fwhm} below Lorentzian FWHM {lorentzian_fwhm}");
    }
    let (mut lo, mut hi) = (0.0, total_fwhm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if voigt_fwhm(lorentzian_fwhm, mid) < total_fwhm {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * total_fwhm {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stationary spectrum of a truth stream: each photon contributes a
/// Lorentzian of FWHM `(1/lifetime + 2 γ_i) / 2π` at its truth frequency.
/// Result is normalized to unit peak.
pub fn spectrum_from_truth(stream: &TagStream, lifetime: f64, grid: &[f64]) -> Result<Spectrum> {
    let (Some(freq), Some(deph)) = (stream.truth_frequencies(), stream.truth_dephasing_rates()) else {
        bail!(InvalidArgument, "spectrum_from_truth needs a truth stream");
    };
    if !(lifetime > 0.0) {
        bail!(InvalidArgument, "lifetime must be positive");
    }
    let template = Spectrum::new(grid.to_vec(), vec![0.0; grid.len()])?;
    if stream.is_empty() {
        bail!(InvalidArgument, "stream has no photons");
    }
    let step = template.step();
    let n = grid.len();
    let x0 = grid[0];

    // photons grouped by dephasing rate, deposited on the grid by linear weights
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for (&nu, &g) in freq.iter().zip(deph) {
        let hist = match groups.iter_mut().find(|(rate, _)| *rate == g) {
            Some((_, h)) => h,
            None => {
                groups.push((g, vec![0.0; n]));
                &mut groups.last_mut().expect("just pushed").1
            }
        };
        let pos = (nu - x0) / step;
        if pos < 0.0 || pos > (n - 1) as f64 {
            continue;
        }
        let i = libm::floor(pos) as usize;
        let frac = pos - i as f64;
        hist[i] += 1.0 - frac;
        if i + 1 < n {
            hist[i + 1] += frac;
        }
    }

    let mut intensity = vec![0.0; n];
    for (g, hist) in &groups {
        let fwhm = (1.0 / lifetime + 2.0 * g) / (2.0 * PI);
        let kernel: Vec<f64> = (0..n).map(|k| lorentzian(k as f64 * step, fwhm)).collect();
        for (j, &w) in hist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (i, out) in intensity.iter_mut().enumerate() {
                *out += w * kernel[i.abs_diff(j)];
            }
        }
    }
    Ok(Spectrum::new(grid.to_vec(), intensity)?.normalized_to_peak())
}

/// Scanning Fabry-Perot interferometer with a Lorentzian (Airy-limit) response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpiParams {
    pub fsr: f64,
    pub sr_fwhm: f64,
}

impl Default for FpiParams {
    fn default() -> Self {
        Self { fsr: 15e9, sr_fwhm: 100e6 }
    }
}

/// FSR-periodic Lorentzian of unit area per order:
/// `Σ_m L(x − m·fsr; fwhm)` in closed form.
pub fn periodic_lorentzian(x: f64, fwhm: f64, fsr: f64) -> f64 {
    let a = PI * fwhm / fsr;
    libm::sinh(a) / (fsr * (libm::cosh(a) - libm::cos(2.0 * PI * x / fsr)))
}

/// Transmission of `spectrum` through the FPI at each scan detuning.
pub fn fpi_scan(spectrum: &Spectrum, params: FpiParams, scan: &[f64]) -> Result<Spectrum> {
    if !(params.fsr > 0.0) || !(params.sr_fwhm > 0.0) {
        bail!(InvalidArgument, "FPI needs positive FSR and SR width");
    }
    if scan.len() < 2 {
        bail!(InvalidArgument, "scan needs at least two points");
    }
    let step = scan[1] - scan[0];
    if step > params.sr_fwhm / 4.0 * (1.0 + 1e-9) {
        bail!(Resolution, "scan step {step} Hz exceeds SR/4 = {} Hz", params.sr_fwhm / 4.0);
    }
    let ds = spectrum.step();
    let intensity: Vec<f64> = scan
        .iter()
        .map(|&d| {
            spectrum
                .detuning()
                .iter()
                .zip(spectrum.intensity())
                .map(|(&nu, &i)| i * periodic_lorentzian(d - nu, params.sr_fwhm, params.fsr))
                .sum::<f64>()
                * ds
        })
        .collect();
    let mut out = Spectrum::new(scan.to_vec(), intensity)?;
    out.sr_fwhm = Some(params.sr_fwhm);
    out.fsr = Some(params.fsr);
    Ok(out)
}

/// Replaces each intensity by a Poisson draw with mean `peak_counts × I / max(I)`.
pub fn counting_noise(spectrum: &Spectrum, peak_counts: f64, seed: u64) -> Result<Spectrum> {
    let mut rng = rng::seeded(seed);
    let (_, peak) = spectrum.peak();
    if !(peak > 0.0) || !(peak_counts > 0.0) {
        bail!(InvalidArgument, "counting noise needs a positive peak and peak_counts");
    }
    let counts = spectrum
        .intensity()
        .iter()
        .map(|&v| {
            let mean = peak_counts * v / peak;
            if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let mut out = Spectrum::new(spectrum.detuning().to_vec(), counts)?;
    out.sr_fwhm = spectrum.sr_fwhm;
    out.fsr = spectrum.fsr;
    Ok(out)
}

/// Instrument response used by the fitter.
#[derive(Clone, Debug, PartialEq)]
pub enum SystemResponse {
    /// Lorentzian of the given FWHM, repeated every `fsr` if given.
    Lorentzian { fwhm: f64, fsr: Option<f64> },
    /// Sampled response on a uniform offset grid (need not be normalized).
    Tabulated { offsets: Vec<f64>, values: Vec<f64> },
}

impl SystemResponse {
    pub fn fpi(params: FpiParams) -> Self {
        SystemResponse::Lorentzian { fwhm: params.sr_fwhm, fsr: Some(params.fsr) }
    }

    fn nominal_fwhm(&self) -> f64 {
        match self {
            SystemResponse::Lorentzian { fwhm, .. } => *fwhm,
            SystemResponse::Tabulated { offsets, values } => {
                let s = Spectrum::new(offsets.clone(), values.clone()).ok();
                s.and_then(|s| s.observed_fwhm()).unwrap_or(0.0)
            }
        }
    }

    /// Unit-area Voigt(L, G) convolved with this response, at `x`.
    fn convolved(&self, x: f64, l: f64, g: f64) -> f64 {
        match self {
            SystemResponse::Lorentzian { fwhm, fsr } => {
                let lt = l + fwhm;
                match fsr {
                    Some(f) => (-3..=3).map(|m| voigt_profile(x - m as f64 * f, lt, g)).sum(),
                    None => voigt_profile(x, lt, g),
                }
            }
            SystemResponse::Tabulated { offsets, values } => {
                let g = if l + g == 0.0 { f64::MIN_POSITIVE } else { g };
                let norm: f64 = values.iter().sum();
                offsets.iter().zip(values).map(|(&s, &v)| v * voigt_profile(x - s, l, g)).sum::<f64>() / norm
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FitUncertainty {
    pub lorentzian_fwhm: f64,
    pub gaussian_fwhm: f64,
    pub total_fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub center: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineshapeFit {
    pub lorentzian_fwhm: f64,
    pub lorentzian_fixed: bool,
    pub gaussian_fwhm: f64,
    /// Voigt FWHM of the line with the instrument response removed.
    pub total_fwhm: f64,
    /// Peak height of the fitted Voigt⊗SR curve above the offset.
    pub amplitude: f64,
    pub offset: f64,
    pub center: f64,
    pub residual_norm: f64,
    pub uncertainty: FitUncertainty,
    /// The line is narrower than a quarter of the instrument response.
    pub resolution_limited: bool,
}

/// Least-squares fit of `A·(Voigt⊗SR)(ν − ν0) + offset`.
///
/// With `fixed_lorentzian_fwhm` set only the Gaussian width, amplitude,
/// center and offset are free.
pub fn fit_voigt_sr(
    measured: &Spectrum,
    sr: &SystemResponse,
    fixed_lorentzian_fwhm: Option<f64>,
) -> Result<LineshapeFit> {
    let x = measured.detuning();
    let y = measured.intensity();
    let (x_peak, y_peak) = measured.peak();
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    if !(y_peak > y_min) {
        bail!(InvalidArgument, "spectrum has no peak to fit");
    }
    let sr_fwhm = sr.nominal_fwhm();
    let observed = measured.observed_fwhm().unwrap_or(4.0 * measured.step());
    let span = x[x.len() - 1] - x[0];
    let width_cap = span.max(observed * 4.0);

    let l_fixed = fixed_lorentzian_fwhm;
    if let Some(l) = l_fixed {
        if !(l >= 0.0) {
            bail!(InvalidArgument, "fixed Lorentzian FWHM must be non-negative");
        }
    }
    let l0 = l_fixed.unwrap_or(0.5 * (observed - sr_fwhm).max(0.0));
    let g0 = (observed - sr_fwhm - l0).max(0.1 * observed);
    let peak_shape = |l: f64, g: f64| sr.convolved(0.0, l, g).max(f64::MIN_POSITIVE);

    // parameters: [height, center, G, offset, (L)]
    let mut initial = vec![y_peak - y_min, x_peak, g0, y_min];
    let mut lower = vec![0.0, x[0], 0.0, -y_peak];
    let mut upper = vec![10.0 * (y_peak - y_min) + 1.0, x[x.len() - 1], width_cap, y_peak];
    let mut scale = vec![(y_peak - y_min).max(1e-300), measured.step(), observed.max(measured.step()), (y_peak - y_min).max(1e-300)];
    if l_fixed.is_none() {
        initial.push(l0);
        lower.push(0.0);
        upper.push(width_cap);
        scale.push(observed.max(measured.step()));
    }
    let resid = |p: &[f64], r: &mut [f64]| {
        let l = l_fixed.unwrap_or_else(|| p[4]);
        let norm = p[0] / peak_shape(l, p[2]);
        for ((ri, &xi), &yi) in r.iter_mut().zip(x).zip(y) {
            *ri = norm * sr.convolved(xi - p[1], l, p[2]) + p[3] - yi;
        }
    };
    let sol = lm::minimize(&lm::Problem {
        initial,
        lower,
        upper,
        scale,
        residuals: &resid,
        n_residuals: x.len(),
    })?;
    let p = &sol.params;
    let l = l_fixed.unwrap_or_else(|| p[4]);
    let g = p[2];
    let total = voigt_fwhm(l, g);
    let sl = if l_fixed.is_some() { 0.0 } else { sol.std_errors[4] };
    let sg = sol.std_errors[2];
    let h = 1e-4 * total.max(1.0);
    let d_dg = (voigt_fwhm(l, g + h) - voigt_fwhm(l, (g - h).max(0.0))) / (g + h - (g - h).max(0.0));
    let d_dl = (voigt_fwhm(l + h, g) - voigt_fwhm((l - h).max(0.0), g)) / (l + h - (l - h).max(0.0));
    let s_total = libm::hypot(d_dg * sg, d_dl * sl);
    Ok(LineshapeFit {
        lorentzian_fwhm: l,
        lorentzian_fixed: l_fixed.is_some(),
        gaussian_fwhm: g,
        total_fwhm: total,
        amplitude: p[0],
        offset: p[3],
        center: p[1],
        residual_norm: sol.residual_norm,
        uncertainty: FitUncertainty {
            lorentzian_fwhm: sl,
            gaussian_fwhm: sg,
            total_fwhm: s_total,
            amplitude: sol.std_errors[0],
            offset: sol.std_errors[3],
            center: sol.std_errors[1],
        },
        resolution_limited: total < 0.25 * sr_fwhm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ft_limit_identities() {
        assert!((ft_limit(1.0 / (2.0 * PI) * 1e-9).unwrap() - 1e9).abs() < 1e-3);
        assert!((ft_limit(652e-12).unwrap() / 1e6 - 244.1).abs() < 0.05);
        assert!(ft_limit(0.0).is_err());
        assert!(ft_limit(1e30).unwrap() < 1e-29);
    }

    #[test]
    fn voigt_fwhm_limits_and_approximation() {
        assert_eq!(voigt_fwhm(250e6, 0.0), 250e6);
        assert_eq!(voigt_fwhm(0.0, 300e6), 300e6);
        for (l, g) in [(1.0, 1.0), (250e6, 262e6), (3.0, 0.2), (0.2, 3.0)] {
            let exact = voigt_fwhm(l, g);
            let approx = voigt_fwhm_approx(l, g);
            assert!((exact - approx).abs() / exact < 5e-4, "{l} {g}: {exact} {approx}");
        }
    }

    #[test]
    fn voigt_fwhm_half_maximum_is_exact() {
        let (l, g) = (0.8, 1.3);
        let w = voigt_fwhm(l, g);
        let ratio = voigt_profile(0.5 * w, l, g) / voigt_profile(0.0, l, g);
        assert!((ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_for_total_inverts() {
        let g = gaussian_fwhm_for_total(250e6, 420e6).unwrap();
        assert!((voigt_fwhm(250e6, g) - 420e6).abs() < 1.0);
        assert!((g / 1e6 - 262.0).abs() < 1.5, "{g}");
        assert!(gaussian_fwhm_for_total(300e6, 200e6).is_err());
    }

    #[test]
    fn periodic_lorentzian_matches_explicit_sum() {
        let (w, f) = (100e6, 15e9);
        for x in [0.0, 30e6, 2e9, 7.4e9] {
            let explicit: f64 = (-20000..=20000).map(|m| lorentzian(x - m as f64 * f, w)).sum();
            let closed = periodic_lorentzian(x, w, f);
            assert!((explicit - closed).abs() / closed < 1e-4, "{x}");
        }
    }

    #[test]
    fn fpi_of_delta_is_sr() {
        let grid = uniform_grid(-1e9, 1e9, 5e6).unwrap();
        let mut intensity = vec![0.0; grid.len()];
        intensity[200] = 1.0;
        let s = Spectrum::new(grid.clone(), intensity).unwrap();
        let scan = uniform_grid(-1e9, 1e9, 5e6).unwrap();
        let m = fpi_scan(&s, FpiParams::default(), &scan).unwrap();
        let w = m.observed_fwhm().unwrap();
        assert!((w - 100e6).abs() / 100e6 < 0.01, "{w}");
    }

    #[test]
    fn fpi_aliases_lines_one_fsr_apart() {
        let grid = uniform_grid(-16e9, 16e9, 10e6).unwrap();
        let one = Spectrum::from_fn(&grid, |x| lorentzian(x + 7.5e9, 300e6)).unwrap();
        let two = Spectrum::from_fn(&grid, |x| lorentzian(x + 7.5e9, 300e6) + lorentzian(x - 7.5e9, 300e6)).unwrap();
        let scan = uniform_grid(5.5e9, 9.5e9, 25e6).unwrap();
        let a = fpi_scan(&one, FpiParams::default(), &scan).unwrap();
        let b = fpi_scan(&two, FpiParams::default(), &scan).unwrap();
        let wa = a.observed_fwhm().unwrap();
        let wb = b.observed_fwhm().unwrap();
        assert!((wa - wb).abs() / wa < 0.02);
        assert!((a.peak().0 - b.peak().0).abs() <= 25e6);
    }

    #[test]
    fn fpi_rejects_coarse_scan() {
        let grid = uniform_grid(-1e9, 1e9, 5e6).unwrap();
        let s = Spectrum::from_fn(&grid, |x| lorentzian(x, 400e6)).unwrap();
        let scan = uniform_grid(-1e9, 1e9, 50e6).unwrap();
        assert!(matches!(fpi_scan(&s, FpiParams::default(), &scan), Err(crate::Error::Resolution(_))));
    }

    #[test]
    fn fit_recovers_noise_free_voigt() {
        let scan = uniform_grid(-5e9, 5e9, 25e6).unwrap();
        let sr = SystemResponse::fpi(FpiParams::default());
        let truth = Spectrum::from_fn(&scan, |x| 3.0 * sr.convolved(x - 40e6, 250e6, 262e6) * 1e8 + 0.1).unwrap();
        let fit = fit_voigt_sr(&truth, &sr, Some(250e6)).unwrap();
        assert!((fit.gaussian_fwhm - 262e6).abs() / 262e6 < 1e-3, "{fit:?}");
        assert!((fit.center - 40e6).abs() < 1e5);
        let free = fit_voigt_sr(&truth, &sr, None).unwrap();
        assert!((free.lorentzian_fwhm - 250e6).abs() / 250e6 < 0.01, "{free:?}");
        assert!((free.gaussian_fwhm - 262e6).abs() / 262e6 < 0.01, "{free:?}");
    }

    #[test]
    fn spectrum_from_truth_single_lorentzian() {
        let tags: Vec<_> = (0..100).map(|i| crate::photon::PhotonTag::with_truth(0, i, 0.0, 0.0)).collect();
        let s = TagStream::from_tags(&tags, 1000, vec!["e".into()]).unwrap();
        let grid = uniform_grid(-3e9, 3e9, 5e6).unwrap();
        let spec = spectrum_from_truth(&s, 652e-12, &grid).unwrap();
        let w = spec.observed_fwhm().unwrap();
        let ft = ft_limit(652e-12).unwrap();
        assert!((w - ft).abs() / ft < 0.005, "{w}");
    }
}
