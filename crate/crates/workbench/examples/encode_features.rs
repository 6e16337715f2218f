//! The two input encodings: word indices over a corpus vocabulary for the
//! recurrent models, `[CLS] … [SEP]` subword rows for the transformers.
//!
//!     cargo run --example encode_features

use std::path::Path;

use aggrobench::core::corpus::{load_corpus, ColumnMap, Language, Split};
use aggrobench::core::features::{encode_transformer, encode_word_index, fit_vocabulary, word_tokens, SubwordTokenizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = load_corpus(&fixtures.join("data/hi_train.csv"), Language::Hi, Split::Training, &ColumnMap::trac2())?;
    let texts: Vec<&str> = corpus.texts().into_iter().take(3).collect();

    let vocab = fit_vocabulary(&corpus, 500, 1)?;
    println!("vocabulary: {} entries", vocab.len());
    let words = encode_word_index(&texts, &vocab, 8);
    for (text, row) in texts.iter().zip(&words.token_ids) {
        println!("{text}\n  tokens {:?}\n  ids    {row:?}", word_tokens(text));
    }

    for name in ["tiny-mbert", "tiny-gpt2"] {
        let tokenizer = SubwordTokenizer::from_dir(&fixtures.join("pretrained").join(name))?;
        let batch = encode_transformer(&texts, &tokenizer, 12)?;
        println!("{name} (cls {}, sep {}, pad {}):", tokenizer.cls_id(), tokenizer.sep_id(), tokenizer.pad_id());
        for (row, mask) in batch.token_ids.iter().zip(&batch.attention_mask) {
            println!("  {row:?}  mask {mask:?}");
        }
    }
    Ok(())
}
