//! Writes small randomly initialised BERT and GPT-2 checkpoints in hub
//! layout, for running the transformer cells without downloads.
//!
//!     cargo run --example stand_in_checkpoints -- [out_dir]

use std::path::PathBuf;

use aggrobench::models::{write_stand_in_checkpoint, StandInFamily, TransformerClassifier};
use aggrobench::core::evaluation::ModelKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("pretrained"));
    let checkpoints = [
        ("tiny-bert", StandInFamily::Bert, 1, ModelKind::BertBase),
        ("tiny-mbert", StandInFamily::Bert, 2, ModelKind::BertMultilingual),
        ("tiny-gpt2", StandInFamily::Gpt2, 3, ModelKind::Gpt2Medium),
    ];
    for (name, family, seed, kind) in checkpoints {
        let dir = out.join(name);
        write_stand_in_checkpoint(&dir, family, seed)?;
        let model = TransformerClassifier::from_checkpoint(kind, &dir, 64, 0)?;
        println!("{}: {} parameters, vocabulary {}", dir.display(), model.num_params(), model.tokenizer().vocab_size());
    }
    Ok(())
}
