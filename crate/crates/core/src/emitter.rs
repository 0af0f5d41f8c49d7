//! Stochastic model of the gated quantum dot.
//!
//! A pulsed two-level emitter with Bernoulli state preparation, exponential
//! radiative decay, occasional re-excitation within one pulse, Ornstein-
//! Uhlenbeck spectral diffusion, optional telegraph blinking, a linear dc
//! Stark shift and a voltage-dependent cotunneling dephasing rate.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, StandardNormal};

use crate::calibration;
use crate::error::{bail, Result};
use crate::photon::{seconds_to_ps, TagStream, PS_PER_SECOND};
use crate::rng::{self, SimRng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuParams {
    /// Stationary standard deviation of the frequency excursion, Hz.
    pub stationary_std: f64,
    pub correlation_time: f64,
}

impl OuParams {
    pub fn off() -> Self {
        Self { stationary_std: 0.0, correlation_time: 1e-9 }
    }
}

/// Two-state blinking. `on_rate` is the dark→bright switching rate and
/// `off_rate` the bright→dark rate, so the bright fraction is
/// `on_rate / (on_rate + off_rate)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelegraphParams {
    pub on_rate: f64,
    pub off_rate: f64,
}

impl TelegraphParams {
    pub fn bright_fraction(&self) -> f64 {
        if self.on_rate + self.off_rate == 0.0 {
            1.0
        } else {
            self.on_rate / (self.on_rate + self.off_rate)
        }
    }
}

/// Charge-plateau model.
///
/// The cotunneling rate follows a Hill profile in `|V - center|` with
/// exponent `half_width / edge_softness`: zero at the center, exactly
/// `cotunnel_rate_edge` at the nominal edge, saturating at twice that far
/// outside. Brightness drops by up to `edge_dimming` as the rate saturates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauParams {
    pub center_voltage: f64,
    pub half_width: f64,
    pub cotunnel_rate_edge: f64,
    pub edge_softness: f64,
    pub edge_dimming: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Species {
    Exciton,
    Trion,
    None,
}

impl Species {
    pub fn label(&self) -> &'static str {
        match self {
            Species::Exciton => "exciton",
            Species::Trion => "trion",
            Species::None => "none",
        }
    }
}

/// Voltage windows `[lo, hi)` in which each species emits; the trion window
/// takes precedence where they overlap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargeMap {
    pub exciton: (f64, f64),
    pub trion: (f64, f64),
}

impl Default for ChargeMap {
    fn default() -> Self {
        Self { exciton: (-1.10, -0.75), trion: (-0.75, -0.35) }
    }
}

impl ChargeMap {
    pub fn species(&self, voltage: f64) -> Species {
        let inside = |w: (f64, f64)| voltage >= w.0 && voltage < w.1;
        if inside(self.trion) {
            Species::Trion
        } else if inside(self.exciton) {
            Species::Exciton
        } else {
            Species::None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmitterConfig {
    pub lifetime: f64,
    /// Transition frequency offset at `reference_voltage`, Hz.
    pub base_frequency: f64,
    pub reference_voltage: f64,
    /// Markovian pure-dephasing rate inside the plateau, 1/s.
    pub dephasing_rate_intrinsic: f64,
    pub diffusion: OuParams,
    pub blinking: Option<TelegraphParams>,
    /// dc Stark slope, Hz/V.
    pub stark_slope: f64,
    pub plateau: PlateauParams,
    pub charge_map: ChargeMap,
    pub prep_fidelity: f64,
    pub reexcitation_prob: f64,
    pub rep_rate: f64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        calibration::calibrated_emitter()
    }
}

impl EmitterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime > 0.0) || !self.lifetime.is_finite() {
            bail!(Configuration, "lifetime must be positive, got {}", self.lifetime);
        }
        if !(self.rep_rate > 0.0) || !self.rep_rate.is_finite() {
            bail!(Configuration, "rep_rate must be positive, got {}", self.rep_rate);
        }
        for (name, p) in [
            ("prep_fidelity", self.prep_fidelity),
            ("reexcitation_prob", self.reexcitation_prob),
            ("plateau.edge_dimming", self.plateau.edge_dimming),
        ] {
            if !(0.0..=1.0).contains(&p) {
                bail!(Configuration, "{name} = {p} outside [0, 1]");
            }
        }
        if !(self.dephasing_rate_intrinsic >= 0.0) {
            bail!(Configuration, "dephasing_rate_intrinsic must be non-negative");
        }
        if !(self.diffusion.stationary_std >= 0.0) || !(self.diffusion.correlation_time > 0.0) {
            bail!(Configuration, "diffusion needs stationary_std >= 0 and correlation_time > 0");
        }
        if let Some(b) = self.blinking {
            if !(b.on_rate >= 0.0) || !(b.off_rate >= 0.0) {
                bail!(Configuration, "blinking rates must be non-negative");
            }
            if b.on_rate == 0.0 && b.off_rate > 0.0 {
                bail!(Configuration, "blinking with on_rate = 0 never emits");
            }
        }
        let p = &self.plateau;
        if !(p.half_width > 0.0) || !(p.edge_softness > 0.0) || !(p.cotunnel_rate_edge >= 0.0) {
            bail!(Configuration, "plateau needs half_width > 0, edge_softness > 0, cotunnel_rate_edge >= 0");
        }
        if !self.stark_slope.is_finite() || !self.base_frequency.is_finite() {
            bail!(Configuration, "stark_slope and base_frequency must be finite");
        }
        Ok(())
    }

    pub fn decay_rate(&self) -> f64 {
        1.0 / self.lifetime
    }

    /// Total Markovian dephasing rate at `voltage`.
    pub fn dephasing_rate(&self, voltage: f64) -> f64 {
        self.dephasing_rate_intrinsic + cotunnel_rate(&self.plateau, voltage)
    }

    /// Homogeneous (Lorentzian) FWHM at `voltage`, Hz.
    pub fn homogeneous_fwhm(&self, voltage: f64) -> f64 {
        (self.decay_rate() + 2.0 * self.dephasing_rate(voltage)) / (2.0 * core::f64::consts::PI)
    }

    pub fn species(&self, voltage: f64) -> Species {
        self.charge_map.species(voltage)
    }
}

pub fn stark_frequency(config: &EmitterConfig, voltage: f64) -> f64 {
    config.base_frequency + config.stark_slope * (voltage - config.reference_voltage)
}

pub fn cotunnel_rate(plateau: &PlateauParams, voltage: f64) -> f64 {
    let x = libm::fabs(voltage - plateau.center_voltage) / plateau.half_width;
    if x == 0.0 {
        return 0.0;
    }
    let s = libm::pow(x, plateau.half_width / plateau.edge_softness);
    if !s.is_finite() {
        return 2.0 * plateau.cotunnel_rate_edge;
    }
    plateau.cotunnel_rate_edge * 2.0 * s / (1.0 + s)
}

/// Relative emission intensity at `voltage` (1 at the plateau center).
pub fn brightness(config: &EmitterConfig, voltage: f64) -> f64 {
    if config.species(voltage) == Species::None {
        return 0.0;
    }
    let p = &config.plateau;
    if p.cotunnel_rate_edge == 0.0 {
        return 1.0;
    }
    1.0 - p.edge_dimming * cotunnel_rate(p, voltage) / (2.0 * p.cotunnel_rate_edge)
}

pub fn charge_state(config: &EmitterConfig, voltage: f64) -> Species {
    config.species(voltage)
}

pub fn pulse_occupation(pulse_area: f64, prep_fidelity: f64) -> f64 {
    let s = libm::sin(0.5 * pulse_area);
    prep_fidelity * s * s
}

/// Monte Carlo Rabi curve: mean detected counts per pulse at each pulse area.
/// The first element of each pair is the area in units of π, which is
/// proportional to the square root of the laser power.
pub fn rabi_curve(
    config: &EmitterConfig,
    areas: &[f64],
    pulses_per_point: u64,
    detection_efficiency: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    if areas.is_empty() || pulses_per_point == 0 {
        bail!(InvalidArgument, "rabi_curve needs at least one area and one pulse per point");
    }
    if !(0.0..=1.0).contains(&detection_efficiency) {
        bail!(InvalidArgument, "detection efficiency {detection_efficiency} outside [0, 1]");
    }
    let mut out = Vec::with_capacity(areas.len());
    for (i, &area) in areas.iter().enumerate() {
        if !(area >= 0.0) {
            bail!(InvalidArgument, "pulse area must be non-negative, got {area}");
        }
        let mut rng = rng::substream(seed, i as u64);
        let p = pulse_occupation(area, config.prep_fidelity);
        let first = binomial(&mut rng, pulses_per_point, p);
        let second = binomial(&mut rng, first, config.reexcitation_prob);
        let detected = binomial(&mut rng, first + second, detection_efficiency);
        out.push((area / core::f64::consts::PI, detected as f64 / pulses_per_point as f64));
    }
    Ok(out)
}

fn binomial(rng: &mut SimRng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Excitation scheme for one simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Excitation {
    pub pulse_area: f64,
    /// Pulse times within one repetition period, seconds, increasing.
    pub pulse_offsets: Vec<f64>,
    /// Frequency offset added to photons from each pulse, Hz.
    pub pulse_detunings: Vec<f64>,
    /// Probability that an emitted photon is kept (collection and
    /// transmission losses before any optics being simulated).
    pub collection_efficiency: f64,
}

impl Excitation {
    pub fn single(pulse_area: f64) -> Self {
        Self { pulse_area, pulse_offsets: vec![0.0], pulse_detunings: vec![0.0], collection_efficiency: 1.0 }
    }

    /// Two pulses per period separated by `separation`.
    pub fn double(pulse_area: f64, separation: f64) -> Self {
        Self {
            pulse_area,
            pulse_offsets: vec![0.0, separation],
            pulse_detunings: vec![0.0, 0.0],
            collection_efficiency: 1.0,
        }
    }

    pub fn with_collection_efficiency(mut self, eta: f64) -> Self {
        self.collection_efficiency = eta;
        self
    }

    pub fn with_detunings(mut self, detunings: Vec<f64>) -> Self {
        self.pulse_detunings = detunings;
        self
    }

    fn validate(&self, rep_period: f64) -> Result<()> {
        if !(self.pulse_area >= 0.0) {
            bail!(InvalidArgument, "pulse area must be non-negative");
        }
        if self.pulse_offsets.is_empty() || self.pulse_offsets.len() != self.pulse_detunings.len() {
            bail!(InvalidArgument, "need one detuning per pulse offset");
        }
        let ok = self.pulse_offsets.windows(2).all(|w| w[0] < w[1])
            && self.pulse_offsets[0] >= 0.0
            && *self.pulse_offsets.last().expect("non-empty") < rep_period;
        if !ok {
            bail!(InvalidArgument, "pulse offsets must increase within one repetition period");
        }
        if !(0.0..=1.0).contains(&self.collection_efficiency) {
            bail!(InvalidArgument, "collection efficiency outside [0, 1]");
        }
        Ok(())
    }
}

/// Exact-discretization Ornstein-Uhlenbeck process.
#[derive(Clone, Debug)]
pub struct OuProcess {
    params: OuParams,
    value: f64,
}

impl OuProcess {
    /// Starts from a draw of the stationary distribution.
    pub fn stationary(params: OuParams, rng: &mut SimRng) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        Self { params, value: params.stationary_std * z }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn advance(&mut self, dt: f64, rng: &mut SimRng) -> f64 {
        if self.params.stationary_std == 0.0 {
            return 0.0;
        }
        let decay = libm::exp(-dt / self.params.correlation_time);
        let spread = self.params.stationary_std * libm::sqrt((1.0 - decay * decay).max(0.0));
        let z: f64 = rng.sample(StandardNormal);
        self.value = self.value * decay + spread * z;
        self.value
    }
}

/// Samples an OU path at increasing times (seconds).
pub fn ou_path(params: OuParams, times: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = rng::seeded(seed);
    let mut ou = OuProcess::stationary(params, &mut rng);
    let mut last = times.first().copied().unwrap_or(0.0);
    times
        .iter()
        .map(|&t| {
            let v = ou.advance(t - last, &mut rng);
            last = t;
            v
        })
        .collect()
}

/// Failures before the first success of a Bernoulli(p) sequence.
fn geometric(rng: &mut SimRng, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let k = libm::floor(libm::log(1.0 - u) / libm::log1p(-p));
    if k >= u64::MAX as f64 / 2.0 {
        u64::MAX / 2
    } else {
        k as u64
    }
}

struct Schedule<'a> {
    period: f64,
    offsets: &'a [f64],
}

impl Schedule<'_> {
    fn time(&self, index: u64) -> f64 {
        let n = self.offsets.len() as u64;
        (index / n) as f64 * self.period + self.offsets[(index % n) as usize]
    }

    /// First pulse index whose time is `>= t`.
    fn first_at_or_after(&self, t: f64) -> u64 {
        let n = self.offsets.len() as u64;
        let period = libm::floor(t / self.period).max(0.0) as u64;
        let mut idx = period * n;
        while self.time(idx) < t {
            idx += 1;
        }
        idx
    }
}

/// Lazily generated telegraph timeline.
struct Telegraph {
    on: Exp<f64>,
    off: Option<Exp<f64>>,
    bright: bool,
    until: f64,
    rng: SimRng,
}

impl Telegraph {
    fn new(params: TelegraphParams, rng: SimRng) -> Self {
        let mut t = Self {
            on: Exp::new(params.on_rate.max(f64::MIN_POSITIVE)).expect("positive rate"),
            off: (params.off_rate > 0.0).then(|| Exp::new(params.off_rate).expect("positive rate")),
            bright: true,
            until: f64::INFINITY,
            rng,
        };
        if let Some(off) = t.off {
            t.bright = t.rng.random::<f64>() < params.bright_fraction();
            t.until = if t.bright { off.sample(&mut t.rng) } else { t.on.sample(&mut t.rng) };
        }
        t
    }

    /// Returns `None` when bright at `t`, otherwise the next bright start.
    fn dark_until(&mut self, t: f64) -> Option<f64> {
        let Some(off) = self.off else { return None };
        while self.until <= t {
            self.bright = !self.bright;
            let dwell = if self.bright { off.sample(&mut self.rng) } else { self.on.sample(&mut self.rng) };
            self.until += dwell;
        }
        (!self.bright).then_some(self.until)
    }
}

struct Emission {
    time: u64,
    excitation: u64,
    pulse_slot: usize,
}

/// Simulates single-pulse emission; see [`simulate`].
pub fn simulate_emission(
    config: &EmitterConfig,
    voltage: f64,
    pulse_area: f64,
    duration: f64,
    seed: u64,
) -> Result<TagStream> {
    simulate(config, voltage, &Excitation::single(pulse_area), duration, seed)
}

/// Simulates the emitter at a fixed gate voltage and returns a truth stream
/// (one channel) carrying per-photon frequency, dephasing rate and
/// excitation-pulse time.
pub fn simulate(
    config: &EmitterConfig,
    voltage: f64,
    excitation: &Excitation,
    duration: f64,
    seed: u64,
) -> Result<TagStream> {
    config.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        bail!(InvalidArgument, "duration must be positive, got {duration}");
    }
    let period = 1.0 / config.rep_rate;
    excitation.validate(period)?;

    let duration_ps = seconds_to_ps(duration);
    let schedule = Schedule { period, offsets: &excitation.pulse_offsets };
    let occupation = pulse_occupation(excitation.pulse_area, config.prep_fidelity) * brightness(config, voltage);
    let eta = excitation.collection_efficiency;
    let p_re = config.reexcitation_prob;
    // probabilities of (first only, both, second only) kept, given excitation
    let w_first = eta * (1.0 - p_re * eta);
    let w_both = p_re * eta * eta;
    let w_second = (1.0 - eta) * p_re * eta;
    let w_any = w_first + w_both + w_second;
    let p_active = occupation * w_any;

    let mut pulse_rng = rng::substream(seed, 0);
    let mut telegraph = config.blinking.map(|b| Telegraph::new(b, rng::substream(seed, 2)));
    let delay = Exp::new(1.0 / config.lifetime).expect("positive lifetime");

    let expected = (duration * config.rep_rate * excitation.pulse_offsets.len() as f64 * p_active * (1.0 + p_re)) as usize;
    let mut emissions: Vec<Emission> = Vec::with_capacity(expected + expected / 16 + 16);
    let n_slots = excitation.pulse_offsets.len();

    if p_active > 0.0 {
        let mut next = geometric(&mut pulse_rng, p_active);
        loop {
            let t_pulse = schedule.time(next);
            if t_pulse > duration {
                break;
            }
            if let Some(tg) = telegraph.as_mut() {
                if let Some(bright_at) = tg.dark_until(t_pulse) {
                    next = schedule.first_at_or_after(bright_at) + geometric(&mut pulse_rng, p_active);
                    continue;
                }
            }
            let u: f64 = pulse_rng.random::<f64>() * w_any;
            let (keep_first, keep_second) = if u < w_first {
                (true, false)
            } else if u < w_first + w_both {
                (true, true)
            } else {
                (false, true)
            };
            let pulse_ps = seconds_to_ps(t_pulse);
            let slot = (next % n_slots as u64) as usize;
            for keep in [keep_first, keep_second] {
                if !keep {
                    continue;
                }
                let t = pulse_ps + libm::round(delay.sample(&mut pulse_rng) * PS_PER_SECOND) as u64;
                if t <= duration_ps {
                    emissions.push(Emission { time: t, excitation: pulse_ps, pulse_slot: slot });
                }
            }
            next += 1 + geometric(&mut pulse_rng, p_active);
        }
    }

    emissions.sort_by_key(|e| (e.time, e.excitation));

    let mut ou_rng = rng::substream(seed, 1);
    let mut ou = OuProcess::stationary(config.diffusion, &mut ou_rng);
    let center = stark_frequency(config, voltage);
    let dephasing = config.dephasing_rate(voltage);
    let mut last = emissions.first().map_or(0, |e| e.time);
    let mut timestamps = Vec::with_capacity(emissions.len());
    let mut frequency = Vec::with_capacity(emissions.len());
    let mut excitation_times = Vec::with_capacity(emissions.len());
    for e in &emissions {
        let dt = (e.time - last) as f64 / PS_PER_SECOND;
        last = e.time;
        let nu = ou.advance(dt, &mut ou_rng);
        timestamps.push(e.time);
        frequency.push(center + excitation.pulse_detunings[e.pulse_slot] + nu);
        excitation_times.push(e.excitation);
    }
    let n = timestamps.len();
    let stream = TagStream::from_columns(
        vec![0; n],
        timestamps,
        Some((frequency, vec![dephasing; n])),
        duration_ps,
        vec!["emitter".to_string()],
    )?
    .with_excitation_times(excitation_times)?;

    let offsets: Vec<_> = excitation.pulse_offsets.iter().map(|o| format!("{o:e}")).collect();
    Ok(stream
        .with_metadata("creation_op", "simulate_emission")
        .with_metadata("seed", seed.to_string())
        .with_metadata("voltage_V", format!("{voltage}"))
        .with_metadata("pulse_area_rad", format!("{}", excitation.pulse_area))
        .with_metadata("rep_rate_Hz", format!("{}", config.rep_rate))
        .with_metadata("lifetime_s", format!("{:e}", config.lifetime))
        .with_metadata("pulse_offsets_s", offsets.join(","))
        .with_metadata("collection_efficiency", format!("{eta}"))
        .with_metadata("species", config.species(voltage).label()))
}
