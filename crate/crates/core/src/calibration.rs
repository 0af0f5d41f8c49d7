//! Calibrated emitter parameters and the analytic relations used to obtain them.
//!
//! The constants are frozen results of the inversions below; the tests
//! re-derive each one.

use crate::emitter::{cotunnel_rate, ChargeMap, EmitterConfig, OuParams, PlateauParams};
use crate::error::{bail, Result};
use crate::interference::gaussian_averaged_visibility;
use crate::photon::GAUSSIAN_FWHM_PER_SIGMA;

pub const LIFETIME: f64 = 652e-12;
pub const REP_RATE: f64 = 76.2e6;
pub const PCFS_REP_RATE: f64 = 304.8e6;
pub const PREP_FIDELITY: f64 = 0.85;

/// Homogeneous linewidth at the plateau center, Hz.
pub const HOMOGENEOUS_FWHM: f64 = 260e6;
/// Stationary (Voigt) linewidth at the plateau center, Hz.
pub const STATIONARY_FWHM: f64 = 420e6;
pub const INTRINSIC_DEPHASING: f64 = 49_942_924.289_174_44;
/// Gaussian FWHM of the spectral-diffusion distribution, Hz.
pub const INHOMOGENEOUS_FWHM: f64 = 253_612_921.231_899_26;

pub const TARGET_G2: f64 = 0.028;
pub const REEXCITATION_PROB: f64 = 0.012_191_936_955_119_791;

pub const TARGET_VISIBILITY_2NS: f64 = 0.855;
pub const CORRELATION_TIME: f64 = 1.496_846_397_579_470_5e-8;

pub const PLATEAU_CENTER: f64 = -0.57;
pub const PLATEAU_HALF_WIDTH: f64 = 0.1;
pub const EDGE_SOFTNESS: f64 = 0.025;
pub const EDGE_DIMMING: f64 = 0.5;
pub const EDGE_VOLTAGE: f64 = -0.45;
pub const TARGET_REMOTE_EDGE: f64 = 0.145;
/// Cotunneling dephasing rate at `EDGE_VOLTAGE`, 1/s.
pub const EDGE_COTUNNEL_RATE: f64 = 4_429_004_428.388_876;
pub const COTUNNEL_RATE_EDGE: f64 = 3_282_452_741.873_082_6;

/// dc Stark slope in the plateau, Hz/V.
pub const STARK_SLOPE: f64 = 72.7e9;
/// dc Stark slope above the tunnel barrier, Hz/V.
pub const STARK_SLOPE_ABOVE_BARRIER: f64 = 71.1e9;

pub fn calibrated_emitter() -> EmitterConfig {
    EmitterConfig {
        lifetime: LIFETIME,
        base_frequency: 0.0,
        reference_voltage: PLATEAU_CENTER,
        dephasing_rate_intrinsic: INTRINSIC_DEPHASING,
        diffusion: OuParams {
            stationary_std: INHOMOGENEOUS_FWHM / GAUSSIAN_FWHM_PER_SIGMA,
            correlation_time: CORRELATION_TIME,
        },
        blinking: None,
        stark_slope: STARK_SLOPE,
        plateau: PlateauParams {
            center_voltage: PLATEAU_CENTER,
            half_width: PLATEAU_HALF_WIDTH,
            cotunnel_rate_edge: COTUNNEL_RATE_EDGE,
            edge_softness: EDGE_SOFTNESS,
            edge_dimming: EDGE_DIMMING,
        },
        charge_map: ChargeMap::default(),
        prep_fidelity: PREP_FIDELITY,
        reexcitation_prob: REEXCITATION_PROB,
        rep_rate: REP_RATE,
    }
}

/// The calibrated emitter at the PCFS repetition rate.
pub fn pcfs_emitter() -> EmitterConfig {
    EmitterConfig { rep_rate: PCFS_REP_RATE, ..calibrated_emitter() }
}

/// `g²(0) = E[N(N−1)] / E[N]²` for preparation probability `q` and a
/// second photon with probability `p` per prepared pulse.
pub fn g2_from_reexcitation(p: f64, prep_fidelity: f64) -> f64 {
    2.0 * p / (prep_fidelity * (1.0 + p) * (1.0 + p))
}

/// Inverse of [`g2_from_reexcitation`] (root in `[0, 1]`).
pub fn reexcitation_for_g2(g2: f64, prep_fidelity: f64) -> Result<f64> {
    let a = g2 * prep_fidelity;
    if !(a > 0.0) || a > 0.5 {
        bail!(InvalidArgument, "no re-excitation probability gives g2 = {g2} at fidelity {prep_fidelity}");
    }
    let b = 2.0 - 2.0 * a;
    Ok((b - libm::sqrt(b * b - 4.0 * a * a)) / (2.0 * a))
}

/// Pure-dephasing rate giving homogeneous FWHM `fwhm` (Hz).
pub fn dephasing_for_homogeneous(fwhm: f64, lifetime: f64) -> Result<f64> {
    let g = (2.0 * core::f64::consts::PI * fwhm - 1.0 / lifetime) / 2.0;
    if g < 0.0 {
        bail!(InvalidArgument, "{fwhm} Hz is below the transform limit");
    }
    Ok(g)
}

/// Expected raw HOM visibility for photons from pulses `delay` apart:
/// the pair kernel averaged over the OU frequency difference, reduced by
/// multi-photon contamination `1/(1+2g²)`.
pub fn hom_visibility_model(config: &EmitterConfig, voltage: f64, delay: f64, g2: f64) -> f64 {
    let d = &config.diffusion;
    let variance = 2.0 * d.stationary_std * d.stationary_std * (1.0 - libm::exp(-delay / d.correlation_time));
    gaussian_averaged_visibility(config.decay_rate(), 2.0 * config.dephasing_rate(voltage), variance) / (1.0 + 2.0 * g2)
}

/// Visibility of statistically independent photons (no contamination term).
pub fn remote_visibility_model(config: &EmitterConfig, voltage: f64) -> f64 {
    let s = config.diffusion.stationary_std;
    gaussian_averaged_visibility(config.decay_rate(), 2.0 * config.dephasing_rate(voltage), 2.0 * s * s)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// OU correlation time that makes the model visibility at `delay` equal `target`.
pub fn correlation_time_for_visibility(
    config: &EmitterConfig,
    voltage: f64,
    delay: f64,
    target: f64,
    g2: f64,
) -> Result<f64> {
    let v = |tc: f64| {
        let mut c = config.clone();
        c.diffusion.correlation_time = tc;
        hom_visibility_model(&c, voltage, delay, g2) - target
    };
    let (lo, hi) = (1e-12, 1.0);
    if v(lo) > 0.0 || v(hi) < 0.0 {
        bail!(InvalidArgument, "visibility {target} is not reachable by tuning the correlation time");
    }
    Ok(bisect(lo, hi, v))
}

/// Plateau edge rate `cotunnel_rate_edge` that makes the remote visibility
/// at `voltage` equal `target`.
pub fn cotunnel_edge_for_remote(config: &EmitterConfig, voltage: f64, target: f64) -> Result<f64> {
    let mut unit = config.plateau;
    unit.cotunnel_rate_edge = 1.0;
    let shape = cotunnel_rate(&unit, voltage);
    if !(shape > 0.0) {
        bail!(InvalidArgument, "voltage {voltage} is at the plateau center");
    }
    let v = |extra: f64| {
        let mut c = config.clone();
        c.plateau.cotunnel_rate_edge = 0.0;
        c.dephasing_rate_intrinsic += extra;
        remote_visibility_model(&c, voltage) - target
    };
    let hi = 1e13;
    if v(0.0) < 0.0 || v(hi) > 0.0 {
        bail!(InvalidArgument, "remote visibility {target} is not reachable");
    }
    Ok(bisect(0.0, hi, v) / shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectroscopy::{gaussian_fwhm_for_total, voigt_fwhm};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn homogeneous_split_reproduces_constants() {
        let g0 = dephasing_for_homogeneous(HOMOGENEOUS_FWHM, LIFETIME).unwrap();
        assert!(rel(g0, INTRINSIC_DEPHASING) < 1e-12);
        let g = gaussian_fwhm_for_total(HOMOGENEOUS_FWHM, STATIONARY_FWHM).unwrap();
        assert!(rel(g, INHOMOGENEOUS_FWHM) < 1e-6, "{g}");
        assert!(rel(voigt_fwhm(HOMOGENEOUS_FWHM, INHOMOGENEOUS_FWHM), STATIONARY_FWHM) < 1e-6);
        let c = calibrated_emitter();
        assert!(rel(c.homogeneous_fwhm(PLATEAU_CENTER), HOMOGENEOUS_FWHM) < 1e-12);
    }

    #[test]
    fn reexcitation_reproduces_g2() {
        let p = reexcitation_for_g2(TARGET_G2, PREP_FIDELITY).unwrap();
        assert!(rel(p, REEXCITATION_PROB) < 1e-12);
        assert!(rel(g2_from_reexcitation(p, PREP_FIDELITY), TARGET_G2) < 1e-12);
    }

    #[test]
    fn correlation_time_reproduces_two_ns_visibility() {
        let c = calibrated_emitter();
        let tc = correlation_time_for_visibility(&c, PLATEAU_CENTER, 2e-9, TARGET_VISIBILITY_2NS, TARGET_G2).unwrap();
        assert!(rel(tc, CORRELATION_TIME) < 1e-8, "{tc}");
        let v: [f64; 3] = [2e-9, 4e-9, 9e-9].map(|d| hom_visibility_model(&c, PLATEAU_CENTER, d, TARGET_G2));
        assert!((v[0] - 0.855).abs() < 1e-9);
        assert!((v[1] - 0.8302).abs() < 1e-4 && (v[2] - 0.7898).abs() < 1e-4, "{v:?}");
        let remote = remote_visibility_model(&c, PLATEAU_CENTER);
        assert!((remote - 0.7572).abs() < 1e-4, "{remote}");
    }

    #[test]
    fn edge_rate_reproduces_remote_visibility() {
        let c = calibrated_emitter();
        let r = cotunnel_edge_for_remote(&c, EDGE_VOLTAGE, TARGET_REMOTE_EDGE).unwrap();
        assert!(rel(r, COTUNNEL_RATE_EDGE) < 1e-8, "{r}");
        assert!(rel(cotunnel_rate(&c.plateau, EDGE_VOLTAGE), EDGE_COTUNNEL_RATE) < 1e-8);
        assert!((remote_visibility_model(&c, EDGE_VOLTAGE) - TARGET_REMOTE_EDGE).abs() < 1e-9);
        for d in [2e-9, 4e-9, 9e-9] {
            let v = hom_visibility_model(&c, EDGE_VOLTAGE, d, TARGET_G2);
            assert!((0.13..0.15).contains(&v), "{v}");
        }
    }
}
