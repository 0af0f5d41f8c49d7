use proptest::prelude::*;

use qdsim_core::correlator::{correlate, correlate_naive, correlate_partitioned, ChannelSet, HistogramSpec};
use qdsim_core::interference::{pair_visibility, pair_visibility_numerical, PairKernelParams};
use qdsim_core::photon::{apply_detector, DetectorModel, PhotonTag, TagStream};
use qdsim_core::spectroscopy::{voigt_fwhm, voigt_fwhm_approx};

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("ch{i}")).collect()
}

/// Up to `max` tags on three channels, clustered so that many pairs fall
/// inside a ±20 ns window.
fn stream(max: usize) -> impl Strategy<Value = TagStream> {
    (0..=max, any::<u64>()).prop_map(|(n, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let span = (n as u64).max(1) * rng.random_range(100..20_000u64);
        let tags: Vec<PhotonTag> =
            (0..n).map(|_| PhotonTag::new(rng.random_range(0..3u8), rng.random_range(0..span))).collect();
        TagStream::from_unsorted_tags(tags, span + 1, labels(3)).unwrap()
    })
}

fn spec() -> impl Strategy<Value = HistogramSpec> {
    (1u64..2_000, 1usize..64, -30_000i64..5_000)
        .prop_map(|(w, n, start)| HistogramSpec { start_ps: start, bin_width_ps: w, n_bins: n })
}

fn selector() -> impl Strategy<Value = ChannelSet> {
    prop_oneof![
        (0u8..3).prop_map(ChannelSet::single),
        Just(ChannelSet::of(&[0, 1])),
        Just(ChannelSet::all()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn correlator_equals_brute_force(s in stream(10_000), sp in spec(), a in selector(), b in selector()) {
        let fast = correlate(&s, a, b, sp).unwrap();
        let slow = correlate_naive(&s, a, b, sp);
        prop_assert_eq!(fast.counts, slow.counts);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapping_channels_mirrors_the_histogram(s in stream(2_000), sp in spec()) {
        let (a, b) = (ChannelSet::single(0), ChannelSet::single(1));
        let ab = correlate(&s, a, b, sp).unwrap();
        let ba = correlate(&s, b, a, sp.mirrored()).unwrap();
        prop_assert_eq!(ab.mirrored().counts, ba.counts);
    }

    #[test]
    fn partitions_do_not_matter(s in stream(3_000), sp in spec(), parts in 1usize..17) {
        let a = ChannelSet::all();
        let whole = correlate(&s, a, a, sp).unwrap();
        prop_assert_eq!(whole, correlate_partitioned(&s, a, a, sp, parts).unwrap());
    }

    #[test]
    fn dead_time_leaves_no_close_followers(s in stream(3_000), dead in 1e-9..200e-9, seed in any::<u64>()) {
        let model = DetectorModel { jitter_fwhm: 0.0, efficiency: 1.0, dead_time: dead, dark_rate: 0.0 };
        let out = apply_detector(&s, &model, seed).unwrap();
        let dead_ps = (dead * 1e12) as u64;
        for ch in 0..3u8 {
            let ts: Vec<u64> = out.iter().filter(|t| t.channel == ch).map(|t| t.timestamp).collect();
            prop_assert!(ts.windows(2).all(|w| w[1] - w[0] >= dead_ps));
        }
        prop_assert!(out.len() <= s.len());
    }

    #[test]
    fn detector_is_deterministic(s in stream(2_000), seed in any::<u64>()) {
        let model = DetectorModel { dark_rate: 1e5, dead_time: 20e-9, ..DetectorModel::high_efficiency_spad() };
        prop_assert_eq!(apply_detector(&s, &model, seed).unwrap(), apply_detector(&s, &model, seed).unwrap());
    }

    #[test]
    fn detector_thins_binomially(seed in any::<u64>(), eff in 0.05f64..0.95) {
        let n = 20_000u64;
        let tags: Vec<_> = (0..n).map(|i| PhotonTag::new(0, i * 1_000)).collect();
        let s = TagStream::from_tags(&tags, n * 1_000, labels(1)).unwrap();
        let model = DetectorModel { jitter_fwhm: 0.0, efficiency: eff, dead_time: 0.0, dark_rate: 0.0 };
        let kept = apply_detector(&s, &model, seed).unwrap().len() as f64;
        let sigma = (n as f64 * eff * (1.0 - eff)).sqrt();
        prop_assert!((kept - n as f64 * eff).abs() < 5.0 * sigma);
    }

    #[test]
    fn voigt_width_is_bounded(l in 0.0f64..5e9, g in 0.0f64..5e9) {
        prop_assume!(l + g > 1.0);
        let v = voigt_fwhm(l, g);
        prop_assert!(v >= l.max(g) * (1.0 - 1e-9) && v <= (l + g) * (1.0 + 1e-9));
        prop_assert!((v / voigt_fwhm_approx(l, g) - 1.0).abs() < 2e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn pair_kernel_matches_two_time_integral(
        lifetime in 200e-12f64..2e-9,
        ga in 0.0f64..3e9,
        gb in 0.0f64..3e9,
        detuning in -2e9f64..2e9,
    ) {
        let p = PairKernelParams { decay_rate: 1.0 / lifetime, dephasing_a: ga, dephasing_b: gb, detuning };
        let exact = pair_visibility(&p);
        let numeric = pair_visibility_numerical(&p, 1200);
        prop_assert!((exact - numeric).abs() < 1e-3, "{exact} vs {numeric}");
    }
}
