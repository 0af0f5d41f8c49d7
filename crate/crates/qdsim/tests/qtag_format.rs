use proptest::prelude::*;

use qdsim::qtag::{self, decode, encoded_len, read_stream, write_stream};
use qdsim::Error;
use qdsim_core::photon::{PhotonTag, TagStream};

fn stream() -> impl Strategy<Value = TagStream> {
    let tag = (0u8..4, 0u64..1_000_000_000, -1e10f64..1e10, 0f64..1e10, 0u64..1000);
    (prop::collection::vec(tag, 0..300), any::<bool>(), any::<bool>(), prop::collection::btree_map("[a-z_]{1,8}", "[ -~]{0,12}", 0..4))
        .prop_map(|(raw, truth, excitation, meta)| {
            let tags: Vec<PhotonTag> = raw
                .iter()
                .map(|&(c, t, f, g, _)| if truth { PhotonTag::with_truth(c, t, f, g) } else { PhotonTag::new(c, t) })
                .collect();
            let labels = (0..4).map(|i| format!("det{i}")).collect();
            let mut s = TagStream::from_unsorted_tags(tags, 1_000_000_000, labels).unwrap();
            if truth && excitation {
                let times = s.timestamps().iter().zip(&raw).map(|(t, r)| t.saturating_sub(r.4)).collect();
                s = s.with_excitation_times(times).unwrap();
            }
            for (k, v) in meta {
                s.set_metadata(k, v);
            }
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn round_trip_is_lossless(s in stream()) {
        let mut bytes = Vec::new();
        let n = write_stream(&s, &mut bytes).unwrap();
        prop_assert_eq!(n as usize, bytes.len());
        prop_assert_eq!(n, encoded_len(&s).unwrap());
        let back = read_stream(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &s);
        let mut again = Vec::new();
        write_stream(&back, &mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn truncation_errors_or_drops_whole_records(s in stream(), cut in any::<prop::sample::Index>()) {
        let mut bytes = Vec::new();
        write_stream(&s, &mut bytes).unwrap();
        let at = cut.index(bytes.len());
        let header = bytes.len() - s.len() * qtag::record_size(u16::from_le_bytes([bytes[6], bytes[7]]));
        match decode(&bytes[..at]) {
            Err(e) => prop_assert!(matches!(e, Error::Format { .. }), "{}", e),
            Ok(prefix) => {
                prop_assert!(at >= header);
                prop_assert!(prefix.len() < s.len());
                prop_assert!(prefix.iter().zip(s.iter()).all(|(a, b)| a == b));
            }
        }
    }

    #[test]
    fn corrupted_bytes_never_panic(s in stream(), pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut bytes = Vec::new();
        write_stream(&s, &mut bytes).unwrap();
        if !bytes.is_empty() {
            let i = pos.index(bytes.len());
            bytes[i] = byte;
        }
        let _ = decode(&bytes);
    }
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("tags.qtag");
    let s = TagStream::from_tags(&[PhotonTag::new(0, 5), PhotonTag::new(1, 9)], 100, vec!["a".into(), "b".into()])
        .unwrap()
        .with_metadata("seed", "3");
    let n = qtag::write_file(&path, &s).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), n);
    assert_eq!(qtag::read_file(&path).unwrap(), s);
    assert!(matches!(qtag::read_file(&dir.path().join("missing.qtag")), Err(Error::File { .. })));
}
