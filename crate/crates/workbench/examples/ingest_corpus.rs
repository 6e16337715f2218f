//! Loads a TRAC-2 style CSV, prints its label distribution and writes the
//! corpus back out with a manifest.
//!
//!     cargo run --example ingest_corpus -- [train.csv] [out_dir]

use std::path::{Path, PathBuf};

use aggrobench::core::corpus::{
    load_corpus, save_corpus, split_train_validation, write_manifest, ColumnMap, CorpusManifest, Language, Split,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut args = std::env::args().skip(1);
    let input = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("data/en_train.csv"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("aggrobench-ingest"));

    let corpus = load_corpus(&input, Language::En, Split::Training, &ColumnMap::trac2())?;
    let d = corpus.distribution();
    println!("{}: {} comments (NAG {}, OAG {}, CAG {})", input.display(), d.total, d.count_nag, d.count_oag, d.count_cag);

    // stratified, so each class keeps its share in both parts
    let (train, validation) = split_train_validation(&corpus, 0.1, 7)?;
    println!("train {:?}, validation {:?}", train.distribution().counts(), validation.distribution().counts());

    std::fs::create_dir_all(&out)?;
    let path = out.join("en_train.csv");
    save_corpus(&corpus, &path)?;
    let manifest = CorpusManifest::describe(&corpus, vec![input], vec![]);
    write_manifest(&manifest, &out.join("en_train.manifest.json"))?;
    println!("wrote {} (content hash {})", path.display(), &manifest.content_hash[..16]);
    Ok(())
}
