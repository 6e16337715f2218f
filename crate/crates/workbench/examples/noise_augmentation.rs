//! Noisy copies of a few comments: synonym swaps, stopword insertion and a
//! local word shuffle, then a whole corpus balanced to its majority class.
//!
//!     cargo run --example noise_augmentation

use std::path::Path;

use aggrobench::core::augmentation::{
    balance_corpus, load_stopwords, plan_balance, BalanceStrategy, NoiseAugmenter, NoiseConfig, SynonymLexicon,
};
use aggrobench::core::corpus::{load_corpus, ColumnMap, Language, Split};
use aggrobench::core::translator::{StubTranslator, TranslationCache, TranslationService};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let lexicon = SynonymLexicon::load(Language::En, &fixtures.join("resources/en_synonyms.tsv"))?;
    let stopwords = load_stopwords(&fixtures.join("resources/en_stopwords.txt"))?;
    let config = NoiseConfig {
        synonym_swap_prob: 0.3,
        stopword_insert_prob: 0.2,
        shuffle_window: 3,
        max_operations_fraction: 0.5,
        seed: 42,
        ..NoiseConfig::default()
    };
    let augmenter = NoiseAugmenter::new(config, lexicon, stopwords)?;

    let corpus = load_corpus(&fixtures.join("data/en_train.csv"), Language::En, Split::Training, &ColumnMap::trac2())?;
    for comment in corpus.comments().iter().step_by(12).take(4) {
        println!("{} [{}]", comment.text(), comment.label().as_str());
        for variant in 0..2 {
            let (noisy, stats) = augmenter.add_noise_variant(comment, variant)?;
            println!("  -> {}  (swapped {}, inserted {}, moved {})", noisy.text(), stats.swapped, stats.inserted, stats.moved);
        }
    }

    // noise only: no donors, so every missing comment comes from the augmenter
    let plan = plan_balance(corpus.distribution(), BalanceStrategy::ToMajority, None)?.with_translation_share(0.0);
    let service = TranslationService::new(Box::new(StubTranslator::new()), TranslationCache::in_memory());
    let balanced = balance_corpus(&corpus, &plan, &augmenter, &service, &[], 1)?;
    println!("balanced {:?} -> {:?}", corpus.distribution().counts(), balanced.distribution().counts());
    Ok(())
}
