//! Cross-checks against an independent Snappy implementation: golden blocks
//! it produced must decode here, and blocks produced here must decode there.

use std::fs;
use std::path::PathBuf;

use icb_core::codec::{self, max_compressed_length, Codec, Snappy};
use proptest::prelude::*;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn golden_cases() -> Vec<(String, Vec<u8>, Vec<u8>)> {
    let mut cases = Vec::new();
    for entry in fs::read_dir(golden_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "bin") {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            let raw = fs::read(&path).unwrap();
            let block = fs::read(path.with_extension("snappy")).unwrap();
            cases.push((name, raw, block));
        }
    }
    cases.sort();
    assert!(cases.len() >= 12, "golden corpus missing");
    cases
}

#[test]
fn reference_blocks_decode_here() {
    for (name, raw, block) in golden_cases() {
        assert_eq!(codec::decompress(&block).unwrap(), raw, "{name}");
        assert_eq!(codec::decompressed_len(&block).unwrap(), raw.len(), "{name}");
    }
}

#[test]
fn local_blocks_decode_in_reference() {
    let mut dec = snap::raw::Decoder::new();
    for (name, raw, _) in golden_cases() {
        let block = codec::compress(&raw).unwrap();
        assert!(block.len() <= max_compressed_length(raw.len()), "{name}");
        assert_eq!(dec.decompress_vec(&block).unwrap(), raw, "{name}");
    }
}

#[test]
fn small_vectors_match_reference_bytes() {
    let golden = golden_cases();
    for name in ["empty", "one_byte", "sixteen_distinct", "run_a_1024"] {
        let (_, raw, block) = golden.iter().find(|(n, ..)| n == name).unwrap();
        assert_eq!(&codec::compress(raw).unwrap(), block, "{name}");
    }
}

#[test]
fn run_of_1024_bytes() {
    // 2-byte preamble, 1-byte literal (2 bytes), then 1023 bytes of copies at
    // 64 per 3-byte element: 15 full pieces and a 63-byte tail = 48 bytes.
    let block = codec::compress(&[0x61; 1024]).unwrap();
    assert_eq!(block.len(), 52);
    assert_eq!(codec::decompress(&block).unwrap(), vec![0x61; 1024]);
}

fn redd_like() -> impl Strategy<Value = Vec<u8>> {
    (any::<u64>(), 1usize..2000, 1u32..200).prop_map(|(seed, n, dwell)| {
        let s = icb_core::Synthetic::new(seed, n).with_profile(icb_core::ApplianceProfile {
            mean_dwell_s: dwell,
            ..Default::default()
        });
        let mut out = Vec::new();
        icb_core::record::serialize_into(&s.readings(), &mut out);
        out
    })
}

fn runs() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec((any::<u8>(), 1usize..300), 0..64)
        .prop_map(|rs| rs.into_iter().flat_map(|(b, n)| std::iter::repeat(b).take(n)).collect())
}

fn any_block_input() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![
        prop::collection::vec(any::<u8>(), 0..5000),
        runs(),
        redd_like(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reference_decodes_ours(input in any_block_input()) {
        let block = Snappy::new().compress(&input).unwrap();
        prop_assert_eq!(snap::raw::Decoder::new().decompress_vec(&block).unwrap(), input);
    }

    #[test]
    fn we_decode_reference(input in any_block_input()) {
        let block = snap::raw::Encoder::new().compress_vec(&input).unwrap();
        prop_assert_eq!(codec::decompress(&block).unwrap(), input);
    }
}
