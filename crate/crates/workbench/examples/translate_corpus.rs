//! Machine-translates the Bangla and Hindi fixtures into English through a
//! persistent cache. The first pass is cut short by a simulated outage; the
//! second pass only pays for what the first did not finish.
//!
//! Set `AGGROBENCH_TRANSLATE_API_KEY` and pass a LibreTranslate endpoint to
//! use a live service instead of the offline word table:
//!
//!     cargo run --example translate_corpus -- [https://libretranslate.example/translate]

use std::path::Path;
use std::time::Duration;

use aggrobench::core::augmentation::{build_translated_corpus, AugmentError};
use aggrobench::core::corpus::{load_corpus, ColumnMap, Language, Split};
use aggrobench::core::translator::{
    FaultPlan, HttpDialect, HttpTranslator, RetryPolicy, StubTranslator, TranslationCache, TranslationProvider,
    TranslationService,
};
use aggrobench::TRANSLATE_KEY_ENV;

fn provider(outage_after: Option<usize>) -> Result<Box<dyn TranslationProvider>, Box<dyn std::error::Error>> {
    if let Some(endpoint) = std::env::args().nth(1) {
        let timeout = Duration::from_secs(30);
        return Ok(Box::new(HttpTranslator::from_env(&endpoint, TRANSLATE_KEY_ENV, HttpDialect::LibreTranslate, timeout)));
    }
    let table = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/resources/word_table.tsv"))?;
    let faults = FaultPlan { outage_after_calls: outage_after, ..Default::default() };
    Ok(Box::new(StubTranslator::new().with_word_table(&table)?.with_faults(faults)))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let sources = [(Language::Bn, "bn"), (Language::Hi, "hi")]
        .into_iter()
        .map(|(lang, code)| {
            load_corpus(&fixtures.join(format!("data/{code}_train.csv")), lang, Split::Training, &ColumnMap::trac2())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let dir = tempfile::tempdir()?;
    let cache_path = dir.path().join("translations.jsonl");
    for (pass, outage) in [(1, Some(60)), (2, None)] {
        let service = TranslationService::new(provider(outage)?, TranslationCache::open(&cache_path)?)
            .with_retry(RetryPolicy::immediate(2))
            .with_max_in_flight(4);
        match build_translated_corpus(&sources, &service, Language::En, 4) {
            Ok(corpus) => {
                println!("pass {pass}: {} comments, {} provider calls", corpus.len(), service.provider_calls());
                for c in corpus.comments().iter().take(3) {
                    println!("  {} <- {}: {}", c.id(), c.source_id().unwrap_or("?"), c.text());
                }
            }
            Err(AugmentError::IncompleteTranslation { untranslated, partial }) => println!(
                "pass {pass}: {} translated, {} failed, {} provider calls; cache holds {}",
                partial.len(),
                untranslated.len(),
                service.provider_calls(),
                service.cached_entries()
            ),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
