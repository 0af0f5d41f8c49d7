//! Faddeeva function and Voigt profile.
//!
//! `w(z)` uses Weideman's rational expansion with N = 32 terms, valid in the
//! closed upper half plane (all a Voigt profile needs).

use num_complex::Complex64;

const WEIDEMAN_L: f64 = 4.756_828_460_010_884;

// Polynomial coefficients, highest degree first.
const WEIDEMAN_A: [f64; 32] = [
    -1.303_179_786_305_008_7e-12,
    3.740_881_293_165_362_5e-12,
    8.030_367_899_963_89e-12,
    -2.154_363_207_783_877e-11,
    -5.544_235_948_166_462_4e-11,
    1.165_825_109_352_377_4e-10,
    4.153_743_091_833_453e-10,
    -5.231_020_481_196_329e-10,
    -3.208_015_091_723_369e-9,
    8.124_889_456_846_652e-10,
    2.379_755_677_989_741_7e-8,
    2.293_043_906_509_996_6e-8,
    -1.481_307_891_512_097_7e-7,
    -4.184_076_370_216_977_6e-7,
    4.255_833_137_575_008_5e-7,
    4.401_531_731_578_55e-6,
    6.821_031_944_001_985e-6,
    -2.140_961_920_171_075e-5,
    -1.307_544_925_461_534_6e-4,
    -2.453_298_027_002_143e-4,
    3.925_913_607_007_031e-4,
    4.519_541_105_349_217e-3,
    1.900_615_578_484_540_8e-2,
    5.730_440_352_983_722e-2,
    1.406_071_622_689_376_9e-1,
    2.954_445_107_150_873e-1,
    5.460_139_720_639_341e-1,
    9.019_254_893_647_999e-1,
    1.345_544_169_234_545,
    1.825_669_629_632_481_5,
    2.263_537_299_900_267_6,
    2.572_253_408_124_569_6,
];

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Faddeeva function `w(z) = exp(-z²) erfc(-iz)` for `Im z >= 0`.
pub(crate) fn faddeeva(z: Complex64) -> Complex64 {
    let iz = Complex64::new(-z.im, z.re);
    let denom = Complex64::new(WEIDEMAN_L, 0.0) - iz;
    let zz = (Complex64::new(WEIDEMAN_L, 0.0) + iz) / denom;
    let mut p = Complex64::new(0.0, 0.0);
    for &a in &WEIDEMAN_A {
        p = p * zz + a;
    }
    p * 2.0 / (denom * denom) + Complex64::new(INV_SQRT_PI, 0.0) / denom
}

/// Unit-area Voigt profile at offset `x` (same unit as the widths).
pub fn voigt_profile(x: f64, lorentzian_fwhm: f64, gaussian_fwhm: f64) -> f64 {
    let gamma = 0.5 * lorentzian_fwhm;
    let sigma = gaussian_fwhm / crate::photon::GAUSSIAN_FWHM_PER_SIGMA;
    if sigma <= 0.0 {
        if gamma <= 0.0 {
            return if x == 0.0 { f64::INFINITY } else { 0.0 };
        }
        return gamma / (core::f64::consts::PI * (x * x + gamma * gamma));
    }
    let s = sigma * core::f64::consts::SQRT_2;
    let w = faddeeva(Complex64::new(x / s, gamma / s));
    w.re / (s * libm::sqrt(core::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, re: f64, im: f64) {
        let err = ((a.re - re).powi(2) + (a.im - im).powi(2)).sqrt();
        let mag = (re * re + im * im).sqrt();
        assert!(err <= 1e-12 * mag.max(1e-3), "{a} vs {re}+{im}i");
    }

    #[test]
    fn matches_reference_values() {
        close(faddeeva(Complex64::new(0.5, 0.5)), 0.533_156_707_912_174_8, 0.230_488_231_384_458_5);
        close(faddeeva(Complex64::new(2.0, 0.3)), 0.076_395_951_675_642_14, 0.309_831_107_140_292_8);
        close(faddeeva(Complex64::new(0.1, 2.0)), 0.254_978_192_266_411_16, 0.010_664_203_845_765_852);
        close(faddeeva(Complex64::new(0.0, 0.0)), 1.0, 0.0);
        close(faddeeva(Complex64::new(3.0, 0.0)), 1.234_098_040_866_795_6e-4, 0.201_157_317_037_600_37);
    }

    #[test]
    fn voigt_limits() {
        let l = voigt_profile(0.3, 1.0, 0.0);
        assert!((l - 0.5 / (core::f64::consts::PI * (0.09 + 0.25))).abs() < 1e-15);
        let sigma = 1.0 / crate::photon::GAUSSIAN_FWHM_PER_SIGMA;
        let g = voigt_profile(0.3, 0.0, 1.0);
        let expect = libm::exp(-0.09 / (2.0 * sigma * sigma)) / (sigma * libm::sqrt(2.0 * core::f64::consts::PI));
        assert!((g - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn voigt_has_unit_area() {
        let (l, g) = (0.7, 1.1);
        let h = 0.01;
        let area: f64 = (-200_000..=200_000).map(|i| voigt_profile(i as f64 * h, l, g) * h).sum();
        // the Lorentzian tail beyond ±2000 carries 2γ/(π·2000)
        assert!((area - 1.0).abs() < 2e-4, "{area}");
    }
}
