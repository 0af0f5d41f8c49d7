//! Time-tagged photon events.
//!
//! Timestamps are integer picoseconds since acquisition start. A stream is
//! either a *truth* stream, where every tag also carries the emitter's
//! instantaneous transition frequency and Markovian dephasing rate, or a
//! *measurement* stream without them. Storage is column-oriented so large
//! streams stay compact.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{bail, Result};
use crate::rng;

pub const PS_PER_SECOND: f64 = 1e12;

/// FWHM of a unit-variance Gaussian, `2 sqrt(2 ln 2)`.
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Rounds a non-negative time in seconds to the picosecond grid.
pub fn seconds_to_ps(seconds: f64) -> u64 {
    if seconds <= 0.0 {
        0
    } else {
        libm::round(seconds * PS_PER_SECOND) as u64
    }
}

pub fn ps_to_seconds(ps: u64) -> f64 {
    ps as f64 / PS_PER_SECOND
}

/// Simulation-only photon properties.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truth {
    /// Transition frequency offset from the reference, Hz.
    pub frequency: f64,
    /// Markovian pure-dephasing rate, 1/s.
    pub dephasing_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonTag {
    pub channel: u8,
    pub timestamp: u64,
    pub truth: Option<Truth>,
}

impl PhotonTag {
    pub fn new(channel: u8, timestamp: u64) -> Self {
        Self { channel, timestamp, truth: None }
    }

    pub fn with_truth(channel: u8, timestamp: u64, frequency: f64, dephasing_rate: f64) -> Self {
        Self { channel, timestamp, truth: Some(Truth { frequency, dephasing_rate }) }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct TruthColumns {
    frequency: Vec<f64>,
    dephasing_rate: Vec<f64>,
}

/// An immutable, globally time-ordered sequence of photon tags.
///
/// Invariants (checked on construction): timestamps are sorted with ties
/// ordered by channel, every timestamp is `<= duration`, every channel index
/// has a label, and truth fields are present for all tags or for none.
#[derive(Clone, Debug, PartialEq)]
pub struct TagStream {
    channels: Vec<u8>,
    timestamps: Vec<u64>,
    truth: Option<TruthColumns>,
    excitation: Option<Vec<u64>>,
    duration: u64,
    channel_labels: Vec<String>,
    metadata: BTreeMap<String, String>,
}

impl TagStream {
    /// Builds a stream from column data that must already be sorted.
    pub fn from_columns(
        channels: Vec<u8>,
        timestamps: Vec<u64>,
        truth: Option<(Vec<f64>, Vec<f64>)>,
        duration: u64,
        channel_labels: Vec<String>,
    ) -> Result<Self> {
        if channels.len() != timestamps.len() {
            bail!(InvalidStream, "{} channels for {} timestamps", channels.len(), timestamps.len());
        }
        let truth = match truth {
            Some((frequency, dephasing_rate)) => {
                if frequency.len() != timestamps.len() || dephasing_rate.len() != timestamps.len() {
                    bail!(InvalidStream, "truth columns do not match tag count {}", timestamps.len());
                }
                Some(TruthColumns { frequency, dephasing_rate })
            }
            None => None,
        };
        if channel_labels.is_empty() || channel_labels.len() > u8::MAX as usize {
            bail!(InvalidStream, "channel count {} outside 1..=255", channel_labels.len());
        }
        let stream = Self {
            channels,
            timestamps,
            truth,
            excitation: None,
            duration,
            channel_labels,
            metadata: BTreeMap::new(),
        };
        stream.check_order()?;
        Ok(stream)
    }

    /// Builds a stream from sorted tags.
    pub fn from_tags(tags: &[PhotonTag], duration: u64, channel_labels: Vec<String>) -> Result<Self> {
        let has_truth = tags.first().is_some_and(|t| t.truth.is_some());
        let mut channels = Vec::with_capacity(tags.len());
        let mut timestamps = Vec::with_capacity(tags.len());
        let mut freq = Vec::new();
        let mut deph = Vec::new();
        for (i, tag) in tags.iter().enumerate() {
            channels.push(tag.channel);
            timestamps.push(tag.timestamp);
            match (has_truth, tag.truth) {
                (true, Some(t)) => {
                    freq.push(t.frequency);
                    deph.push(t.dephasing_rate);
                }
                (false, None) => {}
                _ => bail!(InvalidStream, "tag {i}: truth fields must be present on all tags or none"),
            }
        }
        let truth = has_truth.then_some((freq, deph));
        Self::from_columns(channels, timestamps, truth, duration, channel_labels)
    }

    /// Sorts tags by `(timestamp, channel)` (stable) before building.
    pub fn from_unsorted_tags(
        mut tags: Vec<PhotonTag>,
        duration: u64,
        channel_labels: Vec<String>,
    ) -> Result<Self> {
        tags.sort_by_key(|t| (t.timestamp, t.channel));
        Self::from_tags(&tags, duration, channel_labels)
    }

    fn check_order(&self) -> Result<()> {
        let n_channels = self.channel_labels.len();
        let mut prev: Option<(u64, u8)> = None;
        for (i, (&t, &c)) in self.timestamps.iter().zip(&self.channels).enumerate() {
            if c as usize >= n_channels {
                bail!(InvalidStream, "tag {i}: channel {c} has no label ({n_channels} channels)");
            }
            if t > self.duration {
                bail!(InvalidStream, "tag {i}: timestamp {t} ps beyond duration {} ps", self.duration);
            }
            if let Some(p) = prev {
                if (t, c) < p {
                    bail!(InvalidStream, "tag {i}: out of order ({t} ps, ch {c}) after ({} ps, ch {})", p.0, p.1);
                }
            }
            prev = Some((t, c));
        }
        Ok(())
    }

    pub fn empty(duration: u64, channel_labels: Vec<String>) -> Result<Self> {
        Self::from_columns(Vec::new(), Vec::new(), None, duration, channel_labels)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn duration(&self) -> u64 {
        self.duration
    }

    pub fn duration_seconds(&self) -> f64 {
        ps_to_seconds(self.duration)
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn channels(&self) -> &[u8] {
        &self.channels
    }

    pub fn has_truth(&self) -> bool {
        self.truth.is_some()
    }

    pub fn truth_frequencies(&self) -> Option<&[f64]> {
        self.truth.as_ref().map(|t| t.frequency.as_slice())
    }

    pub fn truth_dephasing_rates(&self) -> Option<&[f64]> {
        self.truth.as_ref().map(|t| t.dephasing_rate.as_slice())
    }

    /// Excitation-pulse time of each photon (simulation truth), if recorded.
    pub fn excitation_times(&self) -> Option<&[u64]> {
        self.excitation.as_deref()
    }

    /// Attaches excitation-pulse times to a truth stream.
    pub fn with_excitation_times(mut self, times: Vec<u64>) -> Result<Self> {
        if !self.has_truth() {
            bail!(InvalidStream, "excitation times require a truth stream");
        }
        if times.len() != self.len() {
            bail!(InvalidStream, "{} excitation times for {} tags", times.len(), self.len());
        }
        if let Some(i) = times.iter().zip(&self.timestamps).position(|(e, t)| e > t) {
            bail!(InvalidStream, "tag {i}: excitation after emission");
        }
        self.excitation = Some(times);
        Ok(self)
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn channel_count(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.set_metadata(key, value);
        self
    }

    pub fn replace_metadata(&mut self, metadata: BTreeMap<String, String>) {
        self.metadata = metadata;
    }

    pub fn tag(&self, index: usize) -> PhotonTag {
        PhotonTag {
            channel: self.channels[index],
            timestamp: self.timestamps[index],
            truth: self.truth.as_ref().map(|t| Truth {
                frequency: t.frequency[index],
                dephasing_rate: t.dephasing_rate[index],
            }),
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = PhotonTag> + '_ {
        (0..self.len()).map(move |i| self.tag(i))
    }

    /// Number of tags on each channel.
    pub fn counts_per_channel(&self) -> Vec<u64> {
        let mut counts = alloc::vec![0u64; self.channel_count()];
        for &c in &self.channels {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Copy of the stream with truth columns dropped.
    pub fn without_truth(&self) -> Self {
        let mut out = self.clone();
        out.truth = None;
        out.excitation = None;
        out
    }

    /// Shifts every timestamp by `offset` picoseconds (duration grows too).
    pub fn shifted(&self, offset: u64) -> Self {
        let mut out = self.clone();
        for t in &mut out.timestamps {
            *t += offset;
        }
        if let Some(e) = out.excitation.as_mut() {
            e.iter_mut().for_each(|t| *t += offset);
        }
        out.duration += offset;
        out
    }

    /// Time-ordered union of two streams with the same channel layout.
    pub fn merge(&self, other: &TagStream) -> Result<TagStream> {
        if self.channel_labels != other.channel_labels {
            bail!(InvalidArgument, "cannot merge streams with different channel labels");
        }
        if self.has_truth() != other.has_truth() {
            bail!(InvalidArgument, "cannot merge a truth stream with a measurement stream");
        }
        let n = self.len() + other.len();
        let mut channels = Vec::with_capacity(n);
        let mut timestamps = Vec::with_capacity(n);
        let mut freq = Vec::new();
        let mut deph = Vec::new();
        let keep_excitation = self.excitation.is_some() && other.excitation.is_some();
        let mut excitation = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let take_self = j >= other.len()
                || (i < self.len()
                    && (self.timestamps[i], self.channels[i]) <= (other.timestamps[j], other.channels[j]));
            let (src, k) = if take_self {
                i += 1;
                (self, i - 1)
            } else {
                j += 1;
                (other, j - 1)
            };
            channels.push(src.channels[k]);
            timestamps.push(src.timestamps[k]);
            if let Some(t) = &src.truth {
                freq.push(t.frequency[k]);
                deph.push(t.dephasing_rate[k]);
            }
            if keep_excitation {
                excitation.push(src.excitation.as_ref().expect("checked")[k]);
            }
        }
        let truth = self.has_truth().then_some((freq, deph));
        let mut merged = TagStream::from_columns(
            channels,
            timestamps,
            truth,
            self.duration.max(other.duration),
            self.channel_labels.clone(),
        )?;
        merged.metadata = self.metadata.clone();
        if keep_excitation {
            merged.excitation = Some(excitation);
        }
        Ok(merged)
    }

    /// Applies a per-tag frequency offset to a truth stream (e.g. an imposed
    /// detuning between excitation pulses).
    pub fn map_truth_frequency(&self, mut f: impl FnMut(PhotonTag) -> f64) -> Result<TagStream> {
        if !self.has_truth() {
            bail!(InvalidArgument, "stream has no truth fields");
        }
        let mut out = self.clone();
        let new: Vec<f64> = self.iter().map(&mut f).collect();
        if let Some(t) = out.truth.as_mut() {
            t.frequency = new;
        }
        Ok(out)
    }

    /// Rebuilds the stream with new channel assignments, re-sorting ties.
    pub(crate) fn relabelled(&self, channels: Vec<u8>, labels: Vec<String>) -> Result<TagStream> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| (self.timestamps[i], channels[i]));
        let timestamps = order.iter().map(|&i| self.timestamps[i]).collect();
        let new_channels = order.iter().map(|&i| channels[i]).collect();
        let truth = self.truth.as_ref().map(|t| {
            (
                order.iter().map(|&i| t.frequency[i]).collect(),
                order.iter().map(|&i| t.dephasing_rate[i]).collect(),
            )
        });
        let mut out = TagStream::from_columns(new_channels, timestamps, truth, self.duration, labels)?;
        out.excitation = self.excitation.as_ref().map(|e| order.iter().map(|&i| e[i]).collect());
        out.metadata = self.metadata.clone();
        Ok(out)
    }
}

/// Single-photon detector: efficiency, timing jitter, dead time, dark counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorModel {
    /// Gaussian timing-jitter FWHM, seconds.
    pub jitter_fwhm: f64,
    pub efficiency: f64,
    /// Seconds after an accepted detection during which the channel is blind.
    pub dead_time: f64,
    /// Dark-count rate per channel, Hz.
    pub dark_rate: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::high_efficiency_spad()
    }
}

impl DetectorModel {
    /// 350 ps / 30 % avalanche diodes used for correlation experiments.
    pub fn high_efficiency_spad() -> Self {
        Self { jitter_fwhm: 350e-12, efficiency: 0.30, dead_time: 0.0, dark_rate: 0.0 }
    }

    /// 50 ps / 2 % timing-optimised diodes used for lifetime measurements.
    pub fn fast_timing_spad() -> Self {
        Self { jitter_fwhm: 50e-12, efficiency: 0.02, dead_time: 0.0, dark_rate: 0.0 }
    }

    /// Lossless, jitter-free, always-live detector.
    pub fn ideal() -> Self {
        Self { jitter_fwhm: 0.0, efficiency: 1.0, dead_time: 0.0, dark_rate: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            bail!(InvalidArgument, "detector efficiency {} outside [0, 1]", self.efficiency);
        }
        if !(self.jitter_fwhm >= 0.0) || !(self.dead_time >= 0.0) || !(self.dark_rate >= 0.0) {
            bail!(InvalidArgument, "detector jitter, dead time and dark rate must be non-negative");
        }
        Ok(())
    }
}

/// Passes a stream through one detector per channel.
///
/// Order of effects: efficiency thinning, Gaussian jitter, dark counts, then
/// per-channel dead time on the re-sorted event list. Truth fields are
/// stripped from the output.
pub fn apply_detector(stream: &TagStream, model: &DetectorModel, seed: u64) -> Result<TagStream> {
    model.validate()?;
    let mut rng = rng::seeded(seed);
    let sigma_ps = model.jitter_fwhm / GAUSSIAN_FWHM_PER_SIGMA * PS_PER_SECOND;
    let jitter = (sigma_ps > 0.0).then(|| Normal::new(0.0, sigma_ps).expect("finite sigma"));
    let duration = stream.duration();

    let mut events: Vec<(u64, u8)> = Vec::with_capacity(
        (stream.len() as f64 * model.efficiency) as usize + 16,
    );
    for (&t, &c) in stream.timestamps().iter().zip(stream.channels()) {
        if model.efficiency < 1.0 && rng.random::<f64>() >= model.efficiency {
            continue;
        }
        let t = match &jitter {
            Some(normal) => {
                let shifted = t as f64 + normal.sample(&mut rng);
                libm::round(shifted).clamp(0.0, duration as f64) as u64
            }
            None => t,
        };
        events.push((t, c));
    }

    if model.dark_rate > 0.0 {
        let gap = Exp::new(model.dark_rate).expect("positive dark rate");
        for c in 0..stream.channel_count() {
            let mut t = 0.0;
            loop {
                t += gap.sample(&mut rng);
                let ps = t * PS_PER_SECOND;
                if ps > duration as f64 {
                    break;
                }
                events.push((libm::round(ps) as u64, c as u8));
            }
        }
    }

    events.sort_unstable();

    let dead_ps = seconds_to_ps(model.dead_time);
    let mut last: Vec<Option<u64>> = alloc::vec![None; stream.channel_count()];
    let mut channels = Vec::with_capacity(events.len());
    let mut timestamps = Vec::with_capacity(events.len());
    for (t, c) in events {
        let slot = &mut last[c as usize];
        if dead_ps > 0 {
            if let Some(prev) = *slot {
                if t - prev < dead_ps {
                    continue;
                }
            }
        }
        *slot = Some(t);
        channels.push(c);
        timestamps.push(t);
    }

    let mut out =
        TagStream::from_columns(channels, timestamps, None, duration, stream.channel_labels().to_vec())?;
    out.replace_metadata(stream.metadata().clone());
    out.set_metadata("detector.seed", seed.to_string());
    out.set_metadata(
        "detector.model",
        format!(
            "jitter_fwhm={:e};efficiency={};dead_time={:e};dark_rate={}",
            model.jitter_fwhm, model.efficiency, model.dead_time, model.dark_rate
        ),
    );
    Ok(out)
}

/// Independent Poisson (coherent-light) streams, one per entry of `rates` (Hz).
pub fn poisson_stream(rates: &[f64], duration: f64, seed: u64) -> Result<TagStream> {
    if !(duration > 0.0) {
        bail!(InvalidArgument, "duration must be positive, got {duration}");
    }
    if rates.is_empty() || rates.iter().any(|r| !(*r >= 0.0)) {
        bail!(InvalidArgument, "need at least one non-negative rate");
    }
    let duration_ps = seconds_to_ps(duration);
    let mut tags = Vec::new();
    for (c, &rate) in rates.iter().enumerate() {
        if rate == 0.0 {
            continue;
        }
        let mut rng = rng::substream(seed, c as u64);
        let gap = Exp::new(rate).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t * PS_PER_SECOND > duration_ps as f64 {
                break;
            }
            tags.push(PhotonTag::new(c as u8, libm::round(t * PS_PER_SECOND) as u64));
        }
    }
    let labels = (0..rates.len()).map(|c| format!("ch{c}")).collect();
    Ok(TagStream::from_unsorted_tags(tags, duration_ps, labels)?
        .with_metadata("creation_op", "poisson_stream")
        .with_metadata("seed", seed.to_string()))
}

/// Lossless 50/50 beamsplitter: every tag leaves on port 0 or port 1 with
/// equal probability, regardless of its input channel.
pub fn beam_splitter(stream: &TagStream, seed: u64) -> Result<TagStream> {
    let mut rng = rng::seeded(seed);
    let channels: Vec<u8> = (0..stream.len()).map(|_| rng.random::<bool>() as u8).collect();
    stream.relabelled(channels, alloc::vec!["port_a".to_string(), "port_b".to_string()])
}
