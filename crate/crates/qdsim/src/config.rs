//! Flat `key = value` configuration files.
//!
//! One parameter per line in SI units, `#` starts a comment. Keys not
//! present keep their calibrated defaults. The hash of a configuration is
//! the SHA-256 of its canonical text, so two files that differ only in
//! comments, ordering or number formatting hash identically.

use std::fmt::Write as _;
use std::path::Path;

use qdsim_core::calibration;
use qdsim_core::emitter::{EmitterConfig, TelegraphParams};
use qdsim_core::pcfs::{log_tau_edges, PCFSScanConfig};
use qdsim_core::photon::DetectorModel;
use qdsim_core::spectroscopy::FpiParams;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationSettings {
    pub pulse_area: f64,
    pub collection_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct G2Settings {
    pub bin_width: f64,
    pub coarse_bin: f64,
    pub long_max_delay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomSettings {
    pub bin_width: f64,
    pub max_delay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpiSettings {
    pub params: FpiParams,
    pub scan_half_range: f64,
    pub scan_step: f64,
    pub grid_step: f64,
    /// Counts in the highest scan bin; zero disables counting noise.
    pub peak_counts: f64,
    /// `None` fits the Lorentzian width freely.
    pub fixed_lorentzian: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcfsSettings {
    pub scan: PCFSScanConfig,
    pub tau_min: f64,
    pub tau_max: f64,
    pub bins_per_decade: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub emitter: EmitterConfig,
    pub detector: DetectorModel,
    pub excitation: ExcitationSettings,
    pub g2: G2Settings,
    pub hom: HomSettings,
    pub fpi: FpiSettings,
    pub pcfs: PcfsSettings,
}

impl Default for Config {
    fn default() -> Self {
        let scan = PCFSScanConfig::default();
        Self {
            emitter: calibration::calibrated_emitter(),
            detector: DetectorModel::high_efficiency_spad(),
            excitation: ExcitationSettings { pulse_area: std::f64::consts::PI, collection_efficiency: 1.0 },
            g2: G2Settings { bin_width: 256e-12, coarse_bin: 13e-9, long_max_delay: 1.2e-6 },
            hom: HomSettings { bin_width: 50e-12, max_delay: 30e-9 },
            fpi: FpiSettings {
                params: FpiParams::default(),
                scan_half_range: 3e9,
                scan_step: 10e6,
                grid_step: 2e6,
                peak_counts: 5000.0,
                fixed_lorentzian: Some(250e6),
            },
            pcfs: PcfsSettings { scan, tau_min: 10e-9, tau_max: 10e-3, bins_per_decade: 5 },
        }
    }
}

fn num(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("'{v}' is not a number"))?;
    if !x.is_finite() {
        return Err(format!("'{v}' is not finite"));
    }
    Ok(x)
}

fn count(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("'{v}' is not a non-negative integer"))
}

macro_rules! keys {
    ($($key:literal => [$($path:tt)*])*) => {
        const REAL_KEYS: &[&str] = &[$($key),*];
        fn real_field<'a>(c: &'a mut Config, key: &str) -> Option<&'a mut f64> {
            Some(match key {
                $($key => &mut c.$($path)*,)*
                _ => return None,
            })
        }
    };
}

keys! {
    "lifetime" => [emitter.lifetime]
    "base_frequency" => [emitter.base_frequency]
    "reference_voltage" => [emitter.reference_voltage]
    "dephasing_rate_intrinsic" => [emitter.dephasing_rate_intrinsic]
    "diffusion.stationary_std" => [emitter.diffusion.stationary_std]
    "diffusion.correlation_time" => [emitter.diffusion.correlation_time]
    "stark_slope" => [emitter.stark_slope]
    "plateau.center_voltage" => [emitter.plateau.center_voltage]
    "plateau.half_width" => [emitter.plateau.half_width]
    "plateau.cotunnel_rate_edge" => [emitter.plateau.cotunnel_rate_edge]
    "plateau.edge_softness" => [emitter.plateau.edge_softness]
    "plateau.edge_dimming" => [emitter.plateau.edge_dimming]
    "charge_map.exciton_min" => [emitter.charge_map.exciton.0]
    "charge_map.exciton_max" => [emitter.charge_map.exciton.1]
    "charge_map.trion_min" => [emitter.charge_map.trion.0]
    "charge_map.trion_max" => [emitter.charge_map.trion.1]
    "prep_fidelity" => [emitter.prep_fidelity]
    "reexcitation_prob" => [emitter.reexcitation_prob]
    "rep_rate" => [emitter.rep_rate]
    "detector.jitter_fwhm" => [detector.jitter_fwhm]
    "detector.efficiency" => [detector.efficiency]
    "detector.dead_time" => [detector.dead_time]
    "detector.dark_rate" => [detector.dark_rate]
    "excitation.pulse_area" => [excitation.pulse_area]
    "excitation.collection_efficiency" => [excitation.collection_efficiency]
    "g2.bin_width" => [g2.bin_width]
    "g2.coarse_bin" => [g2.coarse_bin]
    "g2.long_max_delay" => [g2.long_max_delay]
    "hom.bin_width" => [hom.bin_width]
    "hom.max_delay" => [hom.max_delay]
    "fpi.fsr" => [fpi.params.fsr]
    "fpi.sr_fwhm" => [fpi.params.sr_fwhm]
    "fpi.scan_half_range" => [fpi.scan_half_range]
    "fpi.scan_step" => [fpi.scan_step]
    "fpi.grid_step" => [fpi.grid_step]
    "fpi.peak_counts" => [fpi.peak_counts]
    "pcfs.max_opd" => [pcfs.scan.max_opd]
    "pcfs.opd_step" => [pcfs.scan.opd_step]
    "pcfs.dither_rate" => [pcfs.scan.dither_rate]
    "pcfs.acquisition_time" => [pcfs.scan.acquisition_time]
    "pcfs.contrast" => [pcfs.scan.contrast]
    "pcfs.collection_efficiency" => [pcfs.scan.collection_efficiency]
    "pcfs.rep_rate" => [pcfs.scan.rep_rate]
    "pcfs.tau_min" => [pcfs.tau_min]
    "pcfs.tau_max" => [pcfs.tau_max]
}

impl Config {
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "blinking" if value == "none" => self.emitter.blinking = None,
            "blinking" => return Err(format!("blinking accepts only 'none', got '{value}'")),
            "blinking.on_rate" | "blinking.off_rate" => {
                let x = num(value)?;
                let b = self.emitter.blinking.get_or_insert(TelegraphParams { on_rate: 0.0, off_rate: 0.0 });
                if key == "blinking.on_rate" {
                    b.on_rate = x;
                } else {
                    b.off_rate = x;
                }
            }
            "fpi.fixed_lorentzian" if value == "free" => self.fpi.fixed_lorentzian = None,
            "fpi.fixed_lorentzian" => self.fpi.fixed_lorentzian = Some(num(value)?),
            "pcfs.bins_per_decade" => self.pcfs.bins_per_decade = count(value)?,
            _ => match real_field(self, key) {
                Some(field) => *field = num(value)?,
                None => return Err(format!("unknown key '{key}'")),
            },
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected 'key = value'".into()))?;
            config.set(key.trim(), value.trim()).map_err(err)?;
        }
        config.finish()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    fn finish(&mut self) -> qdsim_core::Result<()> {
        self.pcfs.scan.tau_edges = log_tau_edges(self.pcfs.tau_min, self.pcfs.tau_max, self.pcfs.bins_per_decade)?;
        self.emitter.validate()?;
        self.detector.validate()?;
        self.pcfs.scan.validate()?;
        Ok(())
    }

    /// Canonical text: every key, fixed order, shortest round-trip numbers.
    pub fn to_text(&self) -> String {
        let mut c = self.clone();
        let mut out = String::new();
        for key in REAL_KEYS {
            let v = *real_field(&mut c, key).expect("listed key");
            writeln!(out, "{key} = {v:e}").expect("string write");
        }
        match self.emitter.blinking {
            None => out.push_str("blinking = none\n"),
            Some(b) => {
                writeln!(out, "blinking.on_rate = {:e}", b.on_rate).expect("string write");
                writeln!(out, "blinking.off_rate = {:e}", b.off_rate).expect("string write");
            }
        }
        match self.fpi.fixed_lorentzian {
            None => out.push_str("fpi.fixed_lorentzian = free\n"),
            Some(l) => writeln!(out, "fpi.fixed_lorentzian = {l:e}").expect("string write"),
        }
        writeln!(out, "pcfs.bins_per_decade = {}", self.pcfs.bins_per_decade).expect("string write");
        out
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
        let mut b = c.clone();
        b.emitter.blinking = Some(TelegraphParams { on_rate: 1e5, off_rate: 2e4 });
        b.fpi.fixed_lorentzian = None;
        assert_eq!(Config::parse(&b.to_text()).unwrap(), b);
        assert_ne!(b.hash(), c.hash());
    }

    #[test]
    fn comments_and_formatting_do_not_change_the_hash() {
        let a = Config::parse("rep_rate = 76.2e6\n").unwrap();
        let b = Config::parse("# laser\n  rep_rate=76200000   # Hz\n\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash(), Config::default().hash());
    }

    #[test]
    fn errors_name_the_line() {
        let e = Config::parse("lifetime = 1e-9\n\nbogus = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
        let e = Config::parse("lifetime = fast\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }), "{e}");
        let e = Config::parse("lifetime 1e-9\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }), "{e}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(Config::parse("prep_fidelity = 1.5\n").is_err());
        assert!(Config::parse("pcfs.acquisition_time = 0.07\n").is_err());
    }
}
