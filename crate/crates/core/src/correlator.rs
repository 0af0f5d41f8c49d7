//! Start-stop coincidence histograms over time-tagged streams.
//!
//! Delay convention: `delay = t_stop − t_start` with start tags taken from
//! channel set `a` and stop tags from `b`. A tag is never paired with itself.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{bail, Result};
use crate::photon::{seconds_to_ps, TagStream, PS_PER_SECOND};

/// A set of channel indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ChannelSet([u64; 4]);

impl ChannelSet {
    pub fn single(channel: u8) -> Self {
        Self::of(&[channel])
    }

    pub fn of(channels: &[u8]) -> Self {
        let mut bits = [0u64; 4];
        for &c in channels {
            bits[(c / 64) as usize] |= 1 << (c % 64);
        }
        Self(bits)
    }

    pub fn all() -> Self {
        Self([u64::MAX; 4])
    }

    pub fn contains(&self, channel: u8) -> bool {
        self.0[(channel / 64) as usize] & (1 << (channel % 64)) != 0
    }
}

/// Linear delay binning. Bin `k` covers `[start + k·w, start + (k+1)·w)`
/// picoseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HistogramSpec {
    pub start_ps: i64,
    pub bin_width_ps: u64,
    pub n_bins: usize,
}

impl HistogramSpec {
    /// Bins of width `bin_width` (s) with the zero-delay bin centered at 0,
    /// extending to `±max_delay` (rounded to whole bins).
    pub fn symmetric(bin_width: f64, max_delay: f64) -> Result<Self> {
        let w = seconds_to_ps(bin_width);
        if w == 0 {
            bail!(InvalidArgument, "bin width must be at least 1 ps, got {bin_width} s");
        }
        if !(max_delay >= 0.0) {
            bail!(InvalidArgument, "delay range must be non-negative");
        }
        let side = libm::round(max_delay * PS_PER_SECOND / w as f64) as i64;
        Ok(Self { start_ps: -side * w as i64 - (w / 2) as i64, bin_width_ps: w, n_bins: (2 * side + 1) as usize })
    }

    /// Bins covering `[min_delay, max_delay)` seconds.
    pub fn range(bin_width: f64, min_delay: f64, max_delay: f64) -> Result<Self> {
        let w = seconds_to_ps(bin_width);
        if w == 0 || !(max_delay > min_delay) {
            bail!(InvalidArgument, "need bin width >= 1 ps and max_delay > min_delay");
        }
        let start = libm::round(min_delay * PS_PER_SECOND) as i64;
        let n = libm::round((max_delay - min_delay) * PS_PER_SECOND / w as f64) as usize;
        Ok(Self { start_ps: start, bin_width_ps: w, n_bins: n.max(1) })
    }

    /// Binning of the negated delays (see [`CorrelationHistogram::mirrored`]).
    pub fn mirrored(&self) -> Self {
        Self { start_ps: 1 - self.end_ps(), ..*self }
    }

    pub fn end_ps(&self) -> i64 {
        self.start_ps + (self.n_bins as u64 * self.bin_width_ps) as i64
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width_ps as f64 / PS_PER_SECOND
    }

    /// Center of bin `k`, seconds.
    pub fn center(&self, k: usize) -> f64 {
        (self.start_ps as f64 + (k as f64 + 0.5) * self.bin_width_ps as f64) / PS_PER_SECOND
    }

    pub fn delay_range(&self) -> (f64, f64) {
        (self.start_ps as f64 / PS_PER_SECOND, self.end_ps() as f64 / PS_PER_SECOND)
    }

    #[inline]
    fn bin_of(&self, delay: i64) -> Option<usize> {
        if delay < self.start_ps {
            return None;
        }
        let k = ((delay - self.start_ps) as u64 / self.bin_width_ps) as usize;
        (k < self.n_bins).then_some(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    /// Divide by the accidental level `N_a N_b w / T` of independent streams.
    PoissonLevel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationHistogram {
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    pub normalization: Normalization,
    pub counts_a: u64,
    pub counts_b: u64,
    pub duration_ps: u64,
    /// Set when either channel set selected no tags.
    pub empty_channels: bool,
}

impl CorrelationHistogram {
    pub fn bin_width(&self) -> f64 {
        self.spec.bin_width()
    }

    pub fn delay_range(&self) -> (f64, f64) {
        self.spec.delay_range()
    }

    pub fn delays(&self) -> Vec<f64> {
        (0..self.spec.n_bins).map(|k| self.spec.center(k)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Expected counts per bin for independent Poisson streams.
    pub fn poisson_level(&self) -> f64 {
        if self.duration_ps == 0 {
            return 0.0;
        }
        self.counts_a as f64 * self.counts_b as f64 * self.spec.bin_width_ps as f64 / self.duration_ps as f64
    }

    fn scale(&self) -> f64 {
        match self.normalization {
            Normalization::Raw => 1.0,
            Normalization::PoissonLevel => {
                let level = self.poisson_level();
                if level > 0.0 {
                    1.0 / level
                } else {
                    0.0
                }
            }
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn normalized(&self) -> Vec<f64> {
        let s = self.scale();
        self.counts.iter().map(|&c| c as f64 * s).collect()
    }

    /// Poisson (√N) uncertainty of each normalized bin.
    pub fn uncertainties(&self) -> Vec<f64> {
        let s = self.scale();
        self.counts.iter().map(|&c| libm::sqrt(c as f64) * s).collect()
    }

    /// Adds counts of a histogram with identical binning.
    pub fn merge(&mut self, other: &CorrelationHistogram) -> Result<()> {
        if self.spec != other.spec {
            bail!(InvalidArgument, "cannot merge histograms with different binning");
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.counts_a += other.counts_a;
        self.counts_b += other.counts_b;
        self.duration_ps += other.duration_ps;
        self.empty_channels &= other.empty_channels;
        Ok(())
    }

    /// The same counts indexed by negated delay. Because bins are half-open,
    /// the mirrored binning starts at `1 − end` picoseconds; it equals
    /// `correlate(b, a)` computed with [`HistogramSpec::mirrored`].
    pub fn mirrored(&self) -> CorrelationHistogram {
        let mut out = self.clone();
        out.spec = self.spec.mirrored();
        out.counts.reverse();
        core::mem::swap(&mut out.counts_a, &mut out.counts_b);
        out
    }

    /// Sum of counts over bins whose centers lie in `[lo, hi)` seconds.
    pub fn integrate(&self, lo: f64, hi: f64) -> u64 {
        (0..self.spec.n_bins)
            .filter(|&k| {
                let c = self.spec.center(k);
                c >= lo && c < hi
            })
            .map(|k| self.counts[k])
            .sum()
    }
}

/// Pre-extracted start/stop lists; lets callers split start tags into
/// independent partitions and add the partial histograms.
pub struct Correlator<'a> {
    stream: &'a TagStream,
    spec: HistogramSpec,
    starts: Vec<usize>,
    stop_times: Vec<i64>,
    stop_index: Vec<usize>,
    overlap: bool,
}

impl<'a> Correlator<'a> {
    pub fn new(stream: &'a TagStream, a: ChannelSet, b: ChannelSet, spec: HistogramSpec) -> Result<Self> {
        if spec.bin_width_ps == 0 || spec.n_bins == 0 {
            bail!(InvalidArgument, "histogram needs bin width > 0 and at least one bin");
        }
        let ch = stream.channels();
        let ts = stream.timestamps();
        let starts = (0..stream.len()).filter(|&i| a.contains(ch[i])).collect();
        let stop_index: Vec<usize> = (0..stream.len()).filter(|&i| b.contains(ch[i])).collect();
        let stop_times = stop_index.iter().map(|&i| ts[i] as i64).collect();
        let overlap = (0..=255u8).any(|c| a.contains(c) && b.contains(c));
        Ok(Self { stream, spec, starts, stop_times, stop_index, overlap })
    }

    pub fn n_starts(&self) -> usize {
        self.starts.len()
    }

    /// Counts contributed by start tags `range` (indices into the start list).
    pub fn partial(&self, range: Range<usize>) -> Vec<u64> {
        let mut counts = vec![0u64; self.spec.n_bins];
        let ts = self.stream.timestamps();
        let stops = &self.stop_times;
        let lo = self.spec.start_ps;
        let hi = self.spec.end_ps();
        let w = self.spec.bin_width_ps;
        let Some(&first) = self.starts.get(range.start) else { return counts };
        let mut left = stops.partition_point(|&t| t - (ts[first] as i64) < lo);
        for &i in &self.starts[range] {
            let ti = ts[i] as i64;
            while left < stops.len() && stops[left] - ti < lo {
                left += 1;
            }
            for (j, &t) in stops.iter().enumerate().skip(left) {
                let d = t - ti;
                if d >= hi {
                    break;
                }
                if self.overlap && self.stop_index[j] == i {
                    continue;
                }
                counts[((d - lo) as u64 / w) as usize] += 1;
            }
        }
        counts
    }

    pub fn finish(&self, counts: Vec<u64>) -> CorrelationHistogram {
        CorrelationHistogram {
            spec: self.spec,
            counts,
            normalization: Normalization::PoissonLevel,
            counts_a: self.starts.len() as u64,
            counts_b: self.stop_times.len() as u64,
            duration_ps: self.stream.duration(),
            empty_channels: self.starts.is_empty() || self.stop_times.is_empty(),
        }
    }
}

/// Sliding-window cross-correlation, O(N·W).
pub fn correlate(stream: &TagStream, a: ChannelSet, b: ChannelSet, spec: HistogramSpec) -> Result<CorrelationHistogram> {
    let c = Correlator::new(stream, a, b, spec)?;
    let counts = c.partial(0..c.n_starts());
    Ok(c.finish(counts))
}

/// Same result as [`correlate`], computed over `parts` start partitions.
pub fn correlate_partitioned(
    stream: &TagStream,
    a: ChannelSet,
    b: ChannelSet,
    spec: HistogramSpec,
    parts: usize,
) -> Result<CorrelationHistogram> {
    let c = Correlator::new(stream, a, b, spec)?;
    let n = c.n_starts();
    let parts = parts.max(1);
    let mut total = vec![0u64; spec.n_bins];
    for p in 0..parts {
        let range = n * p / parts..n * (p + 1) / parts;
        for (t, v) in total.iter_mut().zip(c.partial(range)) {
            *t += v;
        }
    }
    Ok(c.finish(total))
}

/// Brute-force O(N²) reference implementation.
pub fn correlate_naive(stream: &TagStream, a: ChannelSet, b: ChannelSet, spec: HistogramSpec) -> CorrelationHistogram {
    let mut counts = vec![0u64; spec.n_bins];
    let ts = stream.timestamps();
    let ch = stream.channels();
    for i in 0..stream.len() {
        if !a.contains(ch[i]) {
            continue;
        }
        for j in 0..stream.len() {
            if i == j || !b.contains(ch[j]) {
                continue;
            }
            if let Some(k) = spec.bin_of(ts[j] as i64 - ts[i] as i64) {
                counts[k] += 1;
            }
        }
    }
    let na = ch.iter().filter(|&&c| a.contains(c)).count() as u64;
    let nb = ch.iter().filter(|&&c| b.contains(c)).count() as u64;
    CorrelationHistogram {
        spec,
        counts,
        normalization: Normalization::PoissonLevel,
        counts_a: na,
        counts_b: nb,
        duration_ps: stream.duration(),
        empty_channels: na == 0 || nb == 0,
    }
}

/// Number of side peaks per side averaged for g²(0) normalization.
pub const DEFAULT_SIDE_PEAKS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct G2Result {
    pub g2_zero: f64,
    pub uncertainty: f64,
    /// `(k, area)` for peaks at `k · rep_period`, `k = −K..=K`.
    pub peak_areas: Vec<(i64, f64)>,
    pub rep_period: f64,
    pub side_peaks: usize,
}

impl G2Result {
    pub fn side_mean(&self) -> f64 {
        let side: Vec<f64> = self.peak_areas.iter().filter(|(k, _)| *k != 0).map(|p| p.1).collect();
        side.iter().sum::<f64>() / side.len() as f64
    }
}

/// Pulsed g²(0) with the default number of side peaks.
pub fn g2_pulsed(histogram: &CorrelationHistogram, rep_period: f64) -> Result<G2Result> {
    g2_pulsed_with(histogram, rep_period, DEFAULT_SIDE_PEAKS)
}

/// Integrates one repetition period around each peak and divides the
/// central area by the mean of `side_peaks` peaks on each side.
pub fn g2_pulsed_with(histogram: &CorrelationHistogram, rep_period: f64, side_peaks: usize) -> Result<G2Result> {
    if !(rep_period > 0.0) {
        bail!(InvalidArgument, "repetition period must be positive");
    }
    if rep_period < 2.0 * histogram.bin_width() {
        bail!(Resolution, "repetition period {rep_period} s shorter than two bins");
    }
    if side_peaks == 0 {
        bail!(InvalidArgument, "need at least one side peak");
    }
    let (lo, hi) = histogram.delay_range();
    let reach = (side_peaks as f64 + 0.5) * rep_period;
    if lo > -reach + 0.5 * histogram.bin_width() || hi < reach - 0.5 * histogram.bin_width() {
        bail!(InvalidArgument, "histogram range ({lo}, {hi}) s does not cover ±{side_peaks} periods");
    }
    let k_max = side_peaks as i64;
    let peak_areas: Vec<(i64, f64)> = (-k_max..=k_max)
        .map(|k| {
            let c = k as f64 * rep_period;
            (k, histogram.integrate(c - 0.5 * rep_period, c + 0.5 * rep_period) as f64)
        })
        .collect();
    let center = peak_areas[side_peaks].1;
    let side_total: f64 = peak_areas.iter().filter(|(k, _)| *k != 0).map(|p| p.1).sum();
    if side_total == 0.0 {
        bail!(InvalidArgument, "side peaks are empty; g2(0) undefined");
    }
    let side_mean = side_total / (2 * side_peaks) as f64;
    let g2 = center / side_mean;
    let uncertainty = if center > 0.0 {
        g2 * libm::sqrt(1.0 / center + 1.0 / side_total)
    } else {
        1.0 / side_mean
    };
    Ok(G2Result { g2_zero: g2, uncertainty, peak_areas, rep_period, side_peaks })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LongDelayProfile {
    /// Coarse-bin centers in |delay|, seconds.
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub uncertainties: Vec<f64>,
    /// Coarse bin width actually used.
    pub bin_width: f64,
}

impl LongDelayProfile {
    /// Largest `|value − 1|` over coarse bins with centers in `[lo, hi]`.
    pub fn flatness(&self, lo: f64, hi: f64) -> f64 {
        self.delays
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| **d >= lo && **d <= hi)
            .map(|(_, v)| libm::fabs(v - 1.0))
            .fold(0.0, f64::max)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.delays.iter().zip(&self.values).zip(&self.uncertainties).map(|((d, v), u)| (*d, *v, *u))
    }
}

/// Folds `±delay`, rebins to `coarse_bin` and normalizes to the Poisson
/// level. For a pulsed source pass `rep_period`: the coarse width is then
/// snapped to the nearest whole number of periods so every coarse bin holds
/// the same number of peaks.
pub fn long_delay_profile(
    histogram: &CorrelationHistogram,
    coarse_bin: f64,
    rep_period: Option<f64>,
) -> Result<LongDelayProfile> {
    if !(coarse_bin > 0.0) {
        bail!(InvalidArgument, "coarse bin must be positive");
    }
    let width = match rep_period {
        Some(t) if t > 0.0 => libm::round(coarse_bin / t).max(1.0) * t,
        Some(_) => bail!(InvalidArgument, "repetition period must be positive"),
        None => coarse_bin,
    };
    if width < histogram.bin_width() {
        bail!(Resolution, "coarse bin narrower than histogram bins");
    }
    let (lo, hi) = histogram.delay_range();
    let max_abs = (-lo).min(hi);
    let n = libm::floor(max_abs / width - 0.5) as usize + 1;
    let mut sums = vec![0u64; n];
    let mut fine = vec![0u64; n];
    for (k, &c) in histogram.counts.iter().enumerate() {
        let d = libm::fabs(histogram.spec.center(k));
        let idx = libm::round(d / width) as usize;
        if idx < n {
            sums[idx] += c;
            fine[idx] += 1;
        }
    }
    let level = histogram.poisson_level();
    if level <= 0.0 {
        bail!(InvalidArgument, "empty channels; cannot normalize");
    }
    let mut delays = Vec::new();
    let mut values = Vec::new();
    let mut uncertainties = Vec::new();
    for i in 0..n {
        if fine[i] == 0 {
            continue;
        }
        let sides = if i == 0 { 1.0 } else { 2.0 };
        let expected = match rep_period {
            Some(_) => level * sides * width / histogram.bin_width(),
            None => level * fine[i] as f64,
        };
        delays.push(i as f64 * width);
        values.push(sums[i] as f64 / expected);
        uncertainties.push(libm::sqrt(sums[i] as f64) / expected);
    }
    Ok(LongDelayProfile { delays, values, uncertainties, bin_width: width })
}

/// Analytic telegraph bunching `1 + (off/on)·exp(−(on+off)τ)`.
pub fn telegraph_g2(on_rate: f64, off_rate: f64, delay: f64) -> f64 {
    1.0 + off_rate / on_rate * libm::exp(-(on_rate + off_rate) * libm::fabs(delay))
}
