use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AugmentError, NoiseAugmenter};
use crate::corpus::{
    Corpus, Label, LabelDistribution, LabeledComment, Language, LanguageTag, Provenance, Split,
};
use crate::seed::derive_seed;
use crate::translator::{TranslationRequest, TranslationService};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceStrategy {
    /// Raise every class to the majority count.
    ToMajority,
    /// Reach caller-given per-class targets.
    ExplicitTargets,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceQuota {
    pub noise: usize,
    pub translation: usize,
}

/// Per-class targets and how each deficit is split between noise and
/// translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub current: LabelDistribution,
    pub targets: LabelDistribution,
    /// Share of each deficit meant to come from translated donor comments.
    pub translation_share: f64,
}

pub const DEFAULT_TRANSLATION_SHARE: f64 = 0.5;

impl BalancePlan {
    pub fn deficits(&self) -> [usize; 3] {
        let (t, c) = (self.targets.counts(), self.current.counts());
        [t[0] - c[0], t[1] - c[1], t[2] - c[2]]
    }

    pub fn quotas(&self) -> [SourceQuota; 3] {
        self.deficits().map(|d| {
            let translation = (d as f64 * self.translation_share).round() as usize;
            SourceQuota {
                noise: d - translation,
                translation,
            }
        })
    }

    pub fn with_translation_share(mut self, share: f64) -> Self {
        self.translation_share = share.clamp(0.0, 1.0);
        self
    }
}

pub fn plan_balance(
    dist: LabelDistribution,
    strategy: BalanceStrategy,
    explicit: Option<LabelDistribution>,
) -> Result<BalancePlan, AugmentError> {
    if dist.total == 0 {
        return Err(AugmentError::InvalidPlan("distribution is empty".into()));
    }
    let targets = match strategy {
        BalanceStrategy::ToMajority => {
            let m = dist.max_count();
            LabelDistribution::new(m, m, m)
        }
        BalanceStrategy::ExplicitTargets => {
            let t = explicit.ok_or_else(|| {
                AugmentError::InvalidPlan("explicit_targets strategy needs targets".into())
            })?;
            let t = LabelDistribution::new(t.count_nag, t.count_oag, t.count_cag);
            for label in Label::ALL {
                if t.get(label) < dist.get(label) {
                    return Err(AugmentError::TargetBelowCurrent {
                        label,
                        target: t.get(label),
                        current: dist.get(label),
                    });
                }
            }
            t
        }
    };
    Ok(BalancePlan {
        current: dist,
        targets,
        translation_share: DEFAULT_TRANSLATION_SHARE,
    })
}

/// Adds noisy and translated comments to `corpus` until every class reaches
/// its planned target.
///
/// Noise sources are raw comments of the same class sampled uniformly with
/// replacement; translation donors are same-class comments from `donors`
/// (other languages only) sampled without replacement. When one source runs
/// dry its quota moves to the other. Augmented comments follow the raw ones,
/// ordered by source id and then variant index.
pub fn balance_corpus(
    corpus: &Corpus,
    plan: &BalancePlan,
    augmenter: &NoiseAugmenter,
    translator: &TranslationService,
    donors: &[Corpus],
    max_in_flight: usize,
) -> Result<Corpus, AugmentError> {
    let LanguageTag::Single(target_language) = corpus.language_tag() else {
        return Err(AugmentError::InvalidPlan(
            "cannot balance a mixed-language corpus".into(),
        ));
    };
    let current = corpus.distribution();
    for label in Label::ALL {
        if plan.targets.get(label) < current.get(label) {
            return Err(AugmentError::TargetBelowCurrent {
                label,
                target: plan.targets.get(label),
                current: current.get(label),
            });
        }
    }
    let plan = BalancePlan {
        current,
        ..plan.clone()
    };

    let base_seed = augmenter.config().seed;
    // (source id, kind, variant) → comment
    let mut augmented: Vec<((String, u8, usize), LabeledComment)> = Vec::new();
    let mut to_translate: Vec<&LabeledComment> = Vec::new();

    for (label, quota) in Label::ALL.into_iter().zip(plan.quotas()) {
        let raw_pool: Vec<&LabeledComment> = corpus
            .with_label(label)
            .filter(|c| c.provenance() == Provenance::Raw)
            .collect();
        let mut donor_pool: Vec<&LabeledComment> = donors
            .iter()
            .flat_map(|d| d.with_label(label))
            .filter(|c| c.language() != target_language)
            .collect();

        let deficit = quota.noise + quota.translation;
        let mut translation = quota.translation.min(donor_pool.len());
        let mut noise = deficit - translation;
        if raw_pool.is_empty() && noise > 0 {
            translation = deficit.min(donor_pool.len());
            noise = deficit - translation;
            if noise > 0 {
                return Err(AugmentError::UnfillableDeficit { label, missing: noise });
            }
        }

        let mut donor_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(base_seed, &[b"donors", label.as_str().as_bytes()]));
        donor_pool.shuffle(&mut donor_rng);
        to_translate.extend(donor_pool.into_iter().take(translation));

        let mut noise_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(base_seed, &[b"noise", label.as_str().as_bytes()]));
        let mut variants: HashMap<&str, usize> = HashMap::new();
        for _ in 0..noise {
            let source = raw_pool[noise_rng.random_range(0..raw_pool.len())];
            let variant = variants.entry(source.id()).or_insert(0);
            let (noisy, _) = augmenter.add_noise_variant(source, *variant)?;
            augmented.push(((source.id().to_string(), 0, *variant), noisy));
            *variant += 1;
        }
    }

    let requests = to_translate
        .iter()
        .map(|c| TranslationRequest::new(c.text(), c.language(), target_language))
        .collect::<Result<Vec<_>, _>>()?;
    let results = translator.translate_batch(&requests, max_in_flight);
    let mut failed = Vec::new();
    for (donor, result) in to_translate.iter().zip(results) {
        match result {
            Ok(text) => {
                let comment = translated_comment(donor, &text, target_language)?;
                augmented.push(((donor.id().to_string(), 1, donor.language() as usize), comment));
            }
            Err(_) => failed.push(donor.id().to_string()),
        }
    }
    if !failed.is_empty() {
        return Err(AugmentError::TranslationFailed { ids: failed });
    }

    augmented.sort_by(|a, b| a.0.cmp(&b.0));
    let mut comments = corpus.comments().to_vec();
    comments.extend(augmented.into_iter().map(|(_, c)| c));
    Ok(Corpus::new(comments, corpus.split(), corpus.language_tag())?)
}

fn translated_comment(
    source: &LabeledComment,
    text: &str,
    target: Language,
) -> Result<LabeledComment, AugmentError> {
    let text = if text.trim().is_empty() { source.text() } else { text };
    Ok(LabeledComment::derived(
        format!("{}:tr:{}", source.id(), source.language()),
        text,
        source.label(),
        target,
        Provenance::Translated,
        source.id(),
    )?)
}

/// Translates every comment of `sources` into `target_language`.
///
/// On partial failure the comments that did translate are returned inside
/// the error together with the ids that did not, so a caller can persist the
/// partial corpus and resume; the translation cache makes the rerun cheap.
pub fn build_translated_corpus(
    sources: &[Corpus],
    translator: &TranslationService,
    target_language: Language,
    max_in_flight: usize,
) -> Result<Corpus, AugmentError> {
    let split = sources.first().map(Corpus::split).unwrap_or(Split::Training);
    let comments: Vec<&LabeledComment> = sources.iter().flat_map(|s| s.comments()).collect();
    if let Some(c) = comments.iter().find(|c| c.language() == target_language) {
        return Err(AugmentError::SameLanguageSource {
            id: c.id().to_string(),
            language: target_language,
        });
    }
    let requests = comments
        .iter()
        .map(|c| TranslationRequest::new(c.text(), c.language(), target_language))
        .collect::<Result<Vec<_>, _>>()?;
    let results = translator.translate_batch(&requests, max_in_flight);

    let mut translated = Vec::with_capacity(comments.len());
    let mut untranslated = Vec::new();
    for (source, result) in comments.iter().zip(results) {
        match result {
            Ok(text) => translated.push(translated_comment(source, &text, target_language)?),
            Err(_) => untranslated.push(source.id().to_string()),
        }
    }
    let corpus = Corpus::new(translated, split, LanguageTag::Single(target_language))?;
    if untranslated.is_empty() {
        Ok(corpus)
    } else {
        Err(AugmentError::IncompleteTranslation {
            untranslated,
            partial: Box::new(corpus),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentation::{NoiseConfig, SynonymLexicon};
    use crate::translator::{FaultPlan, RetryPolicy, StubTranslator, TranslationCache};

    fn synthetic(language: Language, counts: [usize; 3], prefix: &str) -> Corpus {
        let mut comments = Vec::new();
        for label in Label::ALL {
            for k in 0..counts[label.index()] {
                comments.push(
                    LabeledComment::raw(
                        format!("{prefix}{label}{k}"),
                        &format!("{} comment number {k} is good or bad", label.as_str().to_lowercase()),
                        label,
                        language,
                    )
                    .unwrap(),
                );
            }
        }
        Corpus::new(comments, Split::Training, LanguageTag::Single(language)).unwrap()
    }

    fn augmenter() -> NoiseAugmenter {
        let lex = SynonymLexicon::new(Language::En)
            .with_synonyms("good", &["fine", "nice"])
            .with_synonyms("bad", &["awful"]);
        let cfg = NoiseConfig {
            seed: 11,
            ..NoiseConfig::default()
        };
        NoiseAugmenter::new(cfg, lex, vec!["the".into(), "a".into(), "of".into()]).unwrap()
    }

    fn stub_service(stub: StubTranslator) -> TranslationService {
        TranslationService::new(Box::new(stub), TranslationCache::in_memory())
            .with_retry(RetryPolicy::immediate(2))
    }

    #[test]
    fn to_majority_on_table_one_english_counts() {
        let plan = plan_balance(
            LabelDistribution::new(3375, 453, 435),
            BalanceStrategy::ToMajority,
            None,
        )
        .unwrap();
        assert_eq!(plan.targets, LabelDistribution::new(3375, 3375, 3375));
        assert_eq!(plan.deficits(), [0, 2922, 2940]);
    }

    #[test]
    fn explicit_targets_from_augmented_english_row() {
        let plan = plan_balance(
            LabelDistribution::new(3375, 453, 435),
            BalanceStrategy::ExplicitTargets,
            Some(LabelDistribution::new(3375, 2251, 2546)),
        )
        .unwrap();
        assert_eq!(plan.deficits(), [0, 2251 - 453, 2546 - 435]);
        assert_eq!(plan.deficits(), [0, 1798, 2111]);
        assert_eq!(plan.targets.total, 8172);
    }

    #[test]
    fn plan_errors() {
        let d = LabelDistribution::new(10, 5, 5);
        assert!(matches!(
            plan_balance(d, BalanceStrategy::ExplicitTargets, Some(LabelDistribution::new(9, 5, 5))),
            Err(AugmentError::TargetBelowCurrent { label: Label::Nag, .. })
        ));
        assert!(plan_balance(d, BalanceStrategy::ExplicitTargets, None).is_err());
        assert!(plan_balance(LabelDistribution::default(), BalanceStrategy::ToMajority, None).is_err());
        let balanced = plan_balance(LabelDistribution::new(100, 100, 100), BalanceStrategy::ToMajority, None).unwrap();
        assert_eq!(balanced.deficits(), [0, 0, 0]);
    }

    #[test]
    fn quotas_split_each_deficit() {
        let plan = plan_balance(LabelDistribution::new(10, 3, 6), BalanceStrategy::ToMajority, None)
            .unwrap()
            .with_translation_share(0.5);
        let q = plan.quotas();
        assert_eq!(q[1].noise + q[1].translation, 7);
        assert_eq!(q[2].noise + q[2].translation, 4);
        assert_eq!(q[0], SourceQuota::default());
    }

    #[test]
    fn zero_deficit_plan_is_identity() {
        let c = synthetic(Language::En, [4, 4, 4], "e");
        let plan = plan_balance(c.distribution(), BalanceStrategy::ToMajority, None).unwrap();
        let out = balance_corpus(&c, &plan, &augmenter(), &stub_service(StubTranslator::new()), &[], 2).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn balancing_reaches_targets_exactly_with_sound_provenance() {
        let raw = synthetic(Language::En, [500, 50, 50], "e");
        let bn = synthetic(Language::Bn, [10, 30, 20], "b");
        let plan = plan_balance(raw.distribution(), BalanceStrategy::ToMajority, None).unwrap();
        let svc = stub_service(StubTranslator::new());
        let out = balance_corpus(&raw, &plan, &augmenter(), &svc, &[bn.clone()], 2).unwrap();
        assert_eq!(out.distribution(), LabelDistribution::new(500, 500, 500));

        let raw_ids = raw.ids();
        let donor_ids = bn.ids();
        for c in out.comments() {
            match c.provenance() {
                Provenance::Raw => assert!(raw_ids.contains(c.id())),
                Provenance::NoiseAug => {
                    let src = raw.get(c.source_id().unwrap()).unwrap();
                    assert_eq!(src.label(), c.label());
                }
                Provenance::Translated => {
                    assert!(donor_ids.contains(c.source_id().unwrap()));
                    assert_eq!(bn.get(c.source_id().unwrap()).unwrap().label(), c.label());
                    assert_eq!(c.language(), Language::En);
                }
            }
        }
        // all 30 OAG and 20 CAG donors were used
        let translated = out.comments().iter().filter(|c| c.provenance() == Provenance::Translated).count();
        assert_eq!(translated, 50);

        let again = balance_corpus(&raw, &plan, &augmenter(), &svc, &[bn], 2).unwrap();
        assert_eq!(again.content_hash(), out.content_hash());
    }

    #[test]
    fn unfillable_deficit_names_the_label() {
        let raw = synthetic(Language::En, [5, 0, 2], "e");
        let plan = plan_balance(raw.distribution(), BalanceStrategy::ToMajority, None).unwrap();
        let err = balance_corpus(&raw, &plan, &augmenter(), &stub_service(StubTranslator::new()), &[], 1)
            .unwrap_err();
        assert!(matches!(err, AugmentError::UnfillableDeficit { label: Label::Oag, .. }));
        assert!(err.to_string().contains("OAG"));

        // donors can fill a class with no raw comments
        let hi = synthetic(Language::Hi, [0, 6, 0], "h");
        let out = balance_corpus(&raw, &plan, &augmenter(), &stub_service(StubTranslator::new()), &[hi], 1)
            .unwrap();
        assert_eq!(out.distribution(), LabelDistribution::new(5, 5, 5));
    }

    #[test]
    fn translated_corpus_preserves_labels_and_counts() {
        let stub = StubTranslator::new()
            .with_word(Language::Bn, Language::En, "ভালো", "good")
            .with_word(Language::Bn, Language::En, "খারাপ", "bad");
        let comments = vec![
            LabeledComment::raw("b1", "ভালো", Label::Nag, Language::Bn).unwrap(),
            LabeledComment::raw("b2", "খারাপ লোক", Label::Oag, Language::Bn).unwrap(),
            LabeledComment::raw("b3", "ভালো খারাপ", Label::Cag, Language::Bn).unwrap(),
        ];
        let src = Corpus::new(comments, Split::Training, LanguageTag::Single(Language::Bn)).unwrap();
        let out = build_translated_corpus(&[src.clone()], &stub_service(stub), Language::En, 2).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.labels(), src.labels());
        assert_eq!(out.comments()[0].text(), "good");
        assert_eq!(out.comments()[1].text(), "bad [bn]লোক");
        assert!(out.comments().iter().all(|c| c.provenance() == Provenance::Translated));

        let empty = build_translated_corpus(&[], &stub_service(StubTranslator::new()), Language::En, 2).unwrap();
        assert!(empty.is_empty());

        assert!(matches!(
            build_translated_corpus(&[src], &stub_service(StubTranslator::new()), Language::Bn, 2),
            Err(AugmentError::SameLanguageSource { .. })
        ));
    }

    #[test]
    fn translated_distribution_is_sum_of_sources() {
        let bn = synthetic(Language::Bn, [7, 3, 4], "b");
        let hi = synthetic(Language::Hi, [2, 5, 1], "h");
        let out = build_translated_corpus(&[bn.clone(), hi.clone()], &stub_service(StubTranslator::new()), Language::En, 3)
            .unwrap();
        assert_eq!(out.distribution(), bn.distribution() + hi.distribution());
    }

    #[test]
    fn partial_translation_failure_keeps_the_rest() {
        let src = synthetic(Language::Hi, [3, 0, 0], "h");
        let failing = src.comments()[1].text().to_string();
        let stub = StubTranslator::new().with_faults(FaultPlan {
            failing_texts: [failing].into(),
            ..FaultPlan::default()
        });
        match build_translated_corpus(&[src], &stub_service(stub), Language::En, 1) {
            Err(AugmentError::IncompleteTranslation { untranslated, partial }) => {
                assert_eq!(untranslated, ["hNAG1"]);
                assert_eq!(partial.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
