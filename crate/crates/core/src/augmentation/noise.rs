//! Noise operators: synonym swap, stop-word insertion and bounded shuffling.
//!
//! Each operator consumes random draws in a fixed, documented order so that a
//! run can be replayed exactly from its seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AugmentError, SynonymLexicon};
use crate::corpus::{LabeledComment, Provenance};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub synonym_swap_prob: f64,
    pub stopword_insert_prob: f64,
    /// Jitter width of the local shuffle; 1 leaves word order untouched.
    pub shuffle_window: usize,
    /// Cap on altered tokens as a fraction of the original token count.
    pub max_operations_fraction: f64,
    pub seed: u64,
    pub lexicon_id: String,
    pub stopword_list_id: String,
    #[serde(default)]
    pub use_antonyms: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            synonym_swap_prob: 0.15,
            stopword_insert_prob: 0.10,
            shuffle_window: 2,
            max_operations_fraction: 0.3,
            seed: 0,
            lexicon_id: String::new(),
            stopword_list_id: String::new(),
            use_antonyms: false,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !prob_ok(self.synonym_swap_prob) || !prob_ok(self.stopword_insert_prob) {
            return Err(AugmentError::InvalidConfig(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.shuffle_window < 1 {
            return Err(AugmentError::InvalidConfig("shuffle_window must be >= 1".into()));
        }
        if !(self.max_operations_fraction > 0.0 && self.max_operations_fraction <= 1.0) {
            return Err(AugmentError::InvalidConfig(
                "max_operations_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Whitespace tokenization used by the noise operators.
pub fn noise_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Replaces lexicon words, each independently with probability `prob`.
///
/// Draws, per token with at least one candidate: one `f64` in `[0, 1)`; if it
/// is below `prob`, one index in `0..candidates`.
pub fn replace_with_synonyms<R: Rng>(
    tokens: &[String],
    lexicon: &SynonymLexicon,
    prob: f64,
    allow_antonyms: bool,
    rng: &mut R,
) -> Vec<String> {
    let mut unlimited = usize::MAX;
    swap_bounded(tokens, lexicon, prob, allow_antonyms, rng, &mut unlimited).0
}

fn swap_bounded<R: Rng>(
    tokens: &[String],
    lexicon: &SynonymLexicon,
    prob: f64,
    allow_antonyms: bool,
    rng: &mut R,
    budget: &mut usize,
) -> (Vec<String>, usize) {
    let mut swapped = 0;
    let out = tokens
        .iter()
        .map(|token| {
            let candidates = lexicon.candidates(token, allow_antonyms);
            if candidates.is_empty() {
                return token.clone();
            }
            if rng.random::<f64>() < prob {
                let pick = candidates[rng.random_range(0..candidates.len())];
                if *budget > 0 {
                    *budget -= 1;
                    swapped += 1;
                    return pick.to_string();
                }
            }
            token.clone()
        })
        .collect();
    (out, swapped)
}

/// Inserts a random stop word into each of the `len + 1` gaps with
/// probability `prob`.
///
/// Draws, per gap from left to right: one `f64`; if it is below `prob`, one
/// index into `stopwords`.
pub fn insert_stopwords<R: Rng>(
    tokens: &[String],
    stopwords: &[String],
    prob: f64,
    rng: &mut R,
) -> Result<Vec<String>, AugmentError> {
    let mut unlimited = usize::MAX;
    insert_bounded(tokens, stopwords, prob, rng, &mut unlimited).map(|(t, _)| t)
}

fn insert_bounded<R: Rng>(
    tokens: &[String],
    stopwords: &[String],
    prob: f64,
    rng: &mut R,
    budget: &mut usize,
) -> Result<(Vec<String>, usize), AugmentError> {
    if prob > 0.0 && stopwords.is_empty() {
        return Err(AugmentError::EmptyStopwords);
    }
    let mut out = Vec::with_capacity(tokens.len() * 2 + 1);
    let mut inserted = 0;
    for gap in 0..=tokens.len() {
        if prob > 0.0 && rng.random::<f64>() < prob {
            let word = &stopwords[rng.random_range(0..stopwords.len())];
            if *budget > 0 {
                *budget -= 1;
                inserted += 1;
                out.push(word.clone());
            }
        }
        if let Some(token) = tokens.get(gap) {
            out.push(token.clone());
        }
    }
    Ok((out, inserted))
}

/// Local shuffle: token `i` gets sort key `i + u·window`, `u ~ U[0, 1)`, and
/// tokens are stably sorted by key. No token moves more than `window - 1`
/// positions, so `window = 1` is the identity.
///
/// # Panics
/// If `window` is zero.
pub fn shuffle_words<R: Rng>(tokens: &[String], window: usize, rng: &mut R) -> Vec<String> {
    assert!(window >= 1, "shuffle window must be at least 1");
    let mut keyed: Vec<(f64, usize)> = (0..tokens.len())
        .map(|i| (i as f64 + rng.random::<f64>() * window as f64, i))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| tokens[i].clone()).collect()
}

/// Counts of what one `add_noise` call changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoiseStats {
    pub original_tokens: usize,
    pub swapped: usize,
    pub inserted: usize,
    pub moved: usize,
}

impl NoiseStats {
    pub fn altered(&self) -> usize {
        self.swapped + self.inserted + self.moved
    }
}

/// The noise-addition process bound to its lexical resources.
#[derive(Debug, Clone)]
pub struct NoiseAugmenter {
    config: NoiseConfig,
    lexicon: SynonymLexicon,
    stopwords: Vec<String>,
}

impl NoiseAugmenter {
    pub fn new(
        config: NoiseConfig,
        lexicon: SynonymLexicon,
        stopwords: Vec<String>,
    ) -> Result<Self, AugmentError> {
        config.validate()?;
        if config.stopword_insert_prob > 0.0 && stopwords.is_empty() {
            return Err(AugmentError::EmptyStopwords);
        }
        Ok(Self {
            config,
            lexicon,
            stopwords,
        })
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    /// Swap → insert → shuffle on a token list, capped at
    /// `floor(max_operations_fraction · len)` altered tokens. A shuffle that
    /// would exceed the remaining budget is dropped.
    pub fn perturb<R: Rng>(
        &self,
        tokens: &[String],
        rng: &mut R,
    ) -> Result<(Vec<String>, NoiseStats), AugmentError> {
        let c = &self.config;
        let mut budget = (c.max_operations_fraction * tokens.len() as f64).floor() as usize;
        let (swapped_tokens, swapped) = swap_bounded(
            tokens,
            &self.lexicon,
            c.synonym_swap_prob,
            c.use_antonyms,
            rng,
            &mut budget,
        );
        let (with_stops, inserted) = insert_bounded(
            &swapped_tokens,
            &self.stopwords,
            c.stopword_insert_prob,
            rng,
            &mut budget,
        )?;
        let shuffled = shuffle_words(&with_stops, c.shuffle_window, rng);
        let moved = shuffled
            .iter()
            .zip(&with_stops)
            .filter(|(a, b)| a != b)
            .count();
        let (out, moved) = if moved <= budget {
            (shuffled, moved)
        } else {
            (with_stops, 0)
        };
        let stats = NoiseStats {
            original_tokens: tokens.len(),
            swapped,
            inserted,
            moved,
        };
        Ok((out, stats))
    }

    /// Noisy copy of a raw comment, seeded from `(config.seed, comment id)`.
    pub fn add_noise(&self, comment: &LabeledComment) -> Result<LabeledComment, AugmentError> {
        self.add_noise_variant(comment, 0).map(|(c, _)| c)
    }

    /// The `variant`-th noisy copy of `comment`; distinct variants use
    /// distinct derived seeds and ids.
    pub fn add_noise_variant(
        &self,
        comment: &LabeledComment,
        variant: usize,
    ) -> Result<(LabeledComment, NoiseStats), AugmentError> {
        if comment.provenance() != Provenance::Raw {
            return Err(AugmentError::NotRaw(comment.id().to_string()));
        }
        let tokens = noise_tokens(comment.text());
        if tokens.is_empty() {
            return Err(AugmentError::EmptyText(comment.id().to_string()));
        }
        let seed = derive_seed(
            self.config.seed,
            &[comment.id().as_bytes(), &(variant as u64).to_le_bytes()],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (out, stats) = self.perturb(&tokens, &mut rng)?;
        let text = if stats.altered() == 0 {
            comment.text().to_string()
        } else {
            out.join(" ")
        };
        let noisy = LabeledComment::derived(
            format!("{}:noise:{variant}", comment.id()),
            &text,
            comment.label(),
            comment.language(),
            Provenance::NoiseAug,
            comment.id(),
        )?;
        Ok((noisy, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::corpus::{Label, Language};
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        noise_tokens(s)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn lexicon() -> SynonymLexicon {
        SynonymLexicon::new(Language::En)
            .with_synonyms("good", &["fine", "nice", "great"])
            .with_synonyms("bad", &["awful", "poor"])
            .with_synonyms("people", &["folks"])
    }

    #[test]
    fn zero_probability_swap_is_identity() {
        let t = toks("good people do bad things");
        assert_eq!(replace_with_synonyms(&t, &lexicon(), 0.0, false, &mut rng(1)), t);
    }

    #[test]
    fn forced_swap() {
        let lex = SynonymLexicon::new(Language::En).with_synonyms("good", &["fine"]);
        let out = replace_with_synonyms(&toks("good day"), &lex, 1.0, false, &mut rng(3));
        assert_eq!(out, toks("fine day"));
    }

    #[test]
    fn swap_matches_independent_replay() {
        let t = toks("good people are not bad but some good people say bad words");
        let lex = lexicon();
        let out = replace_with_synonyms(&t, &lex, 0.5, false, &mut rng(42));

        // replay: same draws, written against the documented protocol
        let table: [(&str, &[&str]); 3] = [
            ("good", &["fine", "nice", "great"]),
            ("bad", &["awful", "poor"]),
            ("people", &["folks"]),
        ];
        let mut r = rng(42);
        let mut expected = Vec::new();
        for tok in &t {
            match table.iter().find(|(w, _)| *w == tok.as_str()) {
                Some((_, reps)) => {
                    let u: f64 = r.random();
                    if u < 0.5 {
                        expected.push(reps[r.random_range(0..reps.len())].to_string());
                    } else {
                        expected.push(tok.clone());
                    }
                }
                None => expected.push(tok.clone()),
            }
        }
        assert_eq!(out, expected);
        assert_ne!(out, t, "seed 42 should swap something");
    }

    #[test]
    fn antonyms_only_when_allowed() {
        let lex = SynonymLexicon::parse(Language::En, "good\t!bad\n").unwrap();
        let t = toks("good");
        assert_eq!(replace_with_synonyms(&t, &lex, 1.0, false, &mut rng(0)), t);
        assert_eq!(
            replace_with_synonyms(&t, &lex, 1.0, true, &mut rng(0)),
            toks("bad")
        );
    }

    #[test]
    fn stopword_insertion_edge_cases() {
        let stops = vec!["the".to_string(), "a".to_string()];
        let t = toks("x y");
        assert_eq!(insert_stopwords(&t, &stops, 0.0, &mut rng(0)).unwrap(), t);
        let forced = insert_stopwords(&t, &stops, 1.0, &mut rng(0)).unwrap();
        assert_eq!(forced.len(), 5);
        assert_eq!(forced[1], "x");
        assert_eq!(forced[3], "y");
        assert!(matches!(
            insert_stopwords(&t, &[], 0.5, &mut rng(0)),
            Err(AugmentError::EmptyStopwords)
        ));
        assert_eq!(insert_stopwords(&t, &[], 0.0, &mut rng(0)).unwrap(), t);
    }

    #[test]
    fn stopword_insertion_rate_matches_binomial() {
        // n = 9 tokens → 10 gaps, p = 0.3 → mean 3, var 2.1 per trial
        let t = toks("a b c d e f g h i");
        let stops = vec!["zz".to_string()];
        let trials = 10_000;
        let mut r = rng(2024);
        let total: usize = (0..trials)
            .map(|_| insert_stopwords(&t, &stops, 0.3, &mut r).unwrap().len() - t.len())
            .sum();
        let mean = total as f64 / trials as f64;
        let sigma_of_mean = (10.0 * 0.3 * 0.7 / trials as f64).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * sigma_of_mean, "mean {mean}");
    }

    #[test]
    fn shuffle_respects_window_on_fixture() {
        let t: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
        for seed in 0..50 {
            let out = shuffle_words(&t, 2, &mut rng(seed));
            for (pos, tok) in out.iter().enumerate() {
                let orig = t.iter().position(|x| x == tok).unwrap();
                assert!(pos.abs_diff(orig) <= 2);
            }
        }
        assert_eq!(shuffle_words(&toks("solo"), 1, &mut rng(0)), toks("solo"));
        assert_eq!(shuffle_words(&t, 1, &mut rng(9)), t);
        assert!((0..20).any(|s| shuffle_words(&t, 3, &mut rng(s)) != t));
    }

    fn augmenter(config: NoiseConfig) -> NoiseAugmenter {
        NoiseAugmenter::new(config, lexicon(), vec!["the".into(), "of".into()]).unwrap()
    }

    #[test]
    fn identity_config_only_changes_provenance() {
        let cfg = NoiseConfig {
            synonym_swap_prob: 0.0,
            stopword_insert_prob: 0.0,
            shuffle_window: 1,
            ..NoiseConfig::default()
        };
        let c = LabeledComment::raw("c1", "good  people\tare here", Label::Oag, Language::En).unwrap();
        let out = augmenter(cfg).add_noise(&c).unwrap();
        assert_eq!(out.text(), c.text());
        assert_eq!(out.provenance(), Provenance::NoiseAug);
        assert_eq!(out.source_id(), Some("c1"));
        assert_eq!(out.label(), Label::Oag);
        assert_eq!(out.language(), Language::En);
    }

    #[test]
    fn add_noise_is_deterministic_and_rejects_derived_input() {
        let cfg = NoiseConfig {
            synonym_swap_prob: 0.6,
            stopword_insert_prob: 0.4,
            shuffle_window: 3,
            max_operations_fraction: 1.0,
            seed: 99,
            ..NoiseConfig::default()
        };
        let aug = augmenter(cfg);
        let c = LabeledComment::raw(
            "c7",
            "good people never say bad things about good people at all",
            Label::Cag,
            Language::En,
        )
        .unwrap();
        let a = aug.add_noise(&c).unwrap();
        let b = aug.add_noise(&c).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.text(), c.text());
        let (v1, _) = aug.add_noise_variant(&c, 1).unwrap();
        assert_ne!(v1.id(), a.id());
        assert!(matches!(aug.add_noise(&a), Err(AugmentError::NotRaw(_))));
    }

    #[test]
    fn config_validation() {
        for bad in [
            NoiseConfig { synonym_swap_prob: 1.5, ..NoiseConfig::default() },
            NoiseConfig { stopword_insert_prob: -0.1, ..NoiseConfig::default() },
            NoiseConfig { shuffle_window: 0, ..NoiseConfig::default() },
            NoiseConfig { max_operations_fraction: 0.0, ..NoiseConfig::default() },
            NoiseConfig { max_operations_fraction: 1.1, ..NoiseConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(NoiseConfig::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn shuffle_is_a_bounded_permutation(
            words in prop::collection::vec("[a-z]{1,6}", 1..30),
            window in 1usize..5,
            seed in any::<u64>(),
        ) {
            let out = shuffle_words(&words, window, &mut rng(seed));
            let mut a = out.clone();
            let mut b = words.clone();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            // track positions by index to handle repeated words
            let indexed: Vec<String> = (0..words.len()).map(|i| i.to_string()).collect();
            let moved = shuffle_words(&indexed, window, &mut rng(seed));
            for (pos, tok) in moved.iter().enumerate() {
                let orig: usize = tok.parse().unwrap();
                prop_assert!(pos.abs_diff(orig) <= window);
            }
        }

        #[test]
        fn insertion_never_shrinks_and_keeps_order(
            words in prop::collection::vec("[a-z]{1,6}", 0..30),
            prob in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let stops = vec!["STOP".to_string()];
            let out = insert_stopwords(&words, &stops, prob, &mut rng(seed)).unwrap();
            prop_assert!(out.len() >= words.len());
            let kept: Vec<_> = out.into_iter().filter(|w| w != "STOP").collect();
            prop_assert_eq!(kept, words);
        }

        #[test]
        fn altered_fraction_respects_the_cap(
            words in prop::collection::vec(prop::sample::select(vec!["good", "bad", "people", "x", "y"]), 1..25),
            frac in 0.05f64..=1.0,
            seed in any::<u64>(),
        ) {
            let cfg = NoiseConfig {
                synonym_swap_prob: 0.8,
                stopword_insert_prob: 0.5,
                shuffle_window: 3,
                max_operations_fraction: frac,
                seed,
                ..NoiseConfig::default()
            };
            let aug = augmenter(cfg);
            let tokens: Vec<String> = words.iter().map(|w| w.to_string()).collect();
            let (_, stats) = aug.perturb(&tokens, &mut rng(seed)).unwrap();
            prop_assert!(stats.altered() as f64 <= frac * tokens.len() as f64 + 1e-9);
        }
    }
}
