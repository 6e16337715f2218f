//! Subword encoding against ids produced by the Python `transformers`
//! slow tokenizers (`BertTokenizer`, `GPT2Tokenizer`) on the same vocab files.

use std::path::PathBuf;

use aggrobench_core::features::{
    encode_transformer, FeatureError, SubwordFamily, SubwordTokenizer,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn bert() -> SubwordTokenizer {
    SubwordTokenizer::from_dir(&fixture("tiny-bert")).unwrap()
}

fn gpt2() -> SubwordTokenizer {
    SubwordTokenizer::from_dir(&fixture("tiny-gpt2")).unwrap()
}

const BERT_CASES: [(&str, &[u32]); 5] = [
    (
        "She is NOT a sane person...She wants",
        &[2, 71, 70, 73, 69, 79, 78, 5, 5, 5, 71, 98, 3],
    ),
    ("Go back home, you idiot!", &[2, 85, 86, 87, 6, 74, 84, 7, 3]),
    (
        "আমি একটা অসভ্য মহিলা",
        &[
            2, 108, 127, 143, 110, 115, 117, 141, 106, 135, 125, 129, 126, 137, 143, 133, 141, 3,
        ],
    ),
    (
        "भाई तेरी गोडसे",
        &[2, 158, 167, 151, 156, 161, 169, 152, 175, 155, 163, 3],
    ),
    ("unsane people hating", &[2, 96, 97, 91, 23, 42, 61, 93, 3]),
];

#[test]
fn wordpiece_matches_reference_ids() {
    let tok = bert();
    assert_eq!(tok.family(), SubwordFamily::WordPiece);
    assert_eq!((tok.cls_id(), tok.sep_id(), tok.pad_id()), (2, 3, 0));
    for (text, want) in BERT_CASES {
        let batch = encode_transformer(&[text], &tok, 64).unwrap();
        assert_eq!(batch.row(0), want, "{text}");
    }
}

#[test]
fn byte_level_bpe_matches_reference_ids() {
    let tok = gpt2();
    assert_eq!(tok.family(), SubwordFamily::ByteLevelBpe);
    assert_eq!(tok.cls_id(), 280);
    let cases: [(&str, &[u32]); 3] = [
        (
            "She is NOT a sane person...She wants",
            &[
                83, 256, 262, 32, 78, 79, 84, 266, 259, 97, 110, 101, 272, 46, 46, 46, 83, 256, 32,
                119, 97, 110, 116, 115,
            ],
        ),
        (
            "Go back home, you idiot!",
            &[71, 111, 32, 98, 97, 99, 107, 279, 44, 275, 261, 100, 105, 263, 33],
        ),
        (
            "আমি একটা",
            &[
                224, 166, 134, 224, 166, 174, 224, 166, 191, 32, 224, 166, 143, 224, 166, 149, 224,
                166, 159, 224, 166, 190,
            ],
        ),
    ];
    for (text, want) in cases {
        assert_eq!(tok.content_ids(text).unwrap(), want, "{text}");
        let row = encode_transformer(&[text], &tok, 64).unwrap();
        assert_eq!(row.row(0)[0], 280);
        assert_eq!(*row.row(0).last().unwrap(), 280);
        assert_eq!(&row.row(0)[1..row.lengths[0] - 1], want);
    }
}

#[test]
fn truncation_keeps_both_markers() {
    for tok in [bert(), gpt2()] {
        let long = "she is not a sane person ".repeat(30);
        for max_len in 2..20 {
            let b = encode_transformer(&[&long, "", "she"], &tok, max_len).unwrap();
            assert!(b.is_consistent());
            assert_eq!(b.lengths[0], max_len);
            for i in 0..3 {
                let row = b.row(i);
                assert_eq!(row[0], tok.cls_id());
                assert_eq!(*row.last().unwrap(), tok.sep_id());
            }
            // empty text is just the two markers
            assert_eq!(b.lengths[1], 2);
        }
        assert!(matches!(
            encode_transformer(&["x"], &tok, 1),
            Err(FeatureError::MaxLen(1))
        ));
    }
}

#[test]
fn fingerprint_detects_family_mismatch() {
    let (b, g) = (bert(), gpt2());
    assert!(b.ensure_fingerprint(b.fingerprint()).is_ok());
    assert!(matches!(
        b.ensure_fingerprint(g.fingerprint()),
        Err(FeatureError::FingerprintMismatch { .. })
    ));
    assert_eq!(bert().fingerprint(), b.fingerprint());
}

#[test]
fn missing_directory_is_an_error() {
    assert!(SubwordTokenizer::from_dir(&fixture("nope")).is_err());
}
