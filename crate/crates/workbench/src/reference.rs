//! Published TRAC-2 label counts, used to flag unexpected inputs.

use aggrobench_core::corpus::{LabelDistribution, Language, Split};

/// `[NAG, OAG, CAG]` per language and split of the TRAC-2 release.
pub const TRAC2_REFERENCE_COUNTS: [(Language, Split, [usize; 3]); 6] = [
    (Language::En, Split::Training, [3375, 453, 435]),
    (Language::En, Split::Testing, [836, 117, 113]),
    (Language::Hi, Split::Training, [2245, 829, 910]),
    (Language::Hi, Split::Testing, [578, 211, 208]),
    (Language::Bn, Split::Training, [2078, 898, 850]),
    (Language::Bn, Split::Testing, [522, 218, 217]),
];

/// Training counts after balancing with noise and translation.
pub const AUGMENTED_REFERENCE_COUNTS: [(Language, [usize; 3]); 3] = [
    (Language::En, [3375, 2251, 2546]),
    (Language::Hi, [2245, 3497, 1810]),
    (Language::Bn, [2078, 1959, 1966]),
];

/// Bangla and Hindi training data translated into English.
pub const TRANSLATED_ENGLISH_REFERENCE: [usize; 3] = [4373, 3096, 2588];

pub fn reference_counts(language: Language, split: Split) -> [usize; 3] {
    TRAC2_REFERENCE_COUNTS
        .iter()
        .find(|(l, s, _)| *l == language && *s == split)
        .map(|(_, _, c)| *c)
        .expect("every language and split has a reference row")
}

pub fn augmented_reference_counts(language: Language) -> [usize; 3] {
    AUGMENTED_REFERENCE_COUNTS
        .iter()
        .find(|(l, _)| *l == language)
        .map(|(_, c)| *c)
        .expect("every language has a reference row")
}

fn describe(counts: [usize; 3]) -> String {
    format!(
        "NAG {} / OAG {} / CAG {} = {}",
        counts[0],
        counts[1],
        counts[2],
        counts.iter().sum::<usize>()
    )
}

/// A warning when `found` differs from `expected`.
pub fn deviation(what: &str, found: &LabelDistribution, expected: [usize; 3]) -> Option<String> {
    let counts = found.counts();
    (counts != expected).then(|| {
        format!(
            "{what}: found {}, TRAC-2 reference is {}",
            describe(counts),
            describe(expected)
        )
    })
}

pub fn format_distribution(d: &LabelDistribution) -> String {
    describe(d.counts())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rows_add_up() {
        let total = |l, s| reference_counts(l, s).iter().sum::<usize>();
        assert_eq!(total(Language::En, Split::Training), 4263);
        assert_eq!(total(Language::En, Split::Testing), 1066);
        assert_eq!(total(Language::Hi, Split::Training), 3984);
        assert_eq!(total(Language::Hi, Split::Testing), 997);
        assert_eq!(total(Language::Bn, Split::Training), 3826);
        assert_eq!(total(Language::Bn, Split::Testing), 957);
        let aug = |l| augmented_reference_counts(l).iter().sum::<usize>();
        assert_eq!((aug(Language::En), aug(Language::Hi), aug(Language::Bn)), (8172, 7552, 6003));
        assert_eq!(TRANSLATED_ENGLISH_REFERENCE.iter().sum::<usize>(), 10057);
    }

    #[test]
    fn augmentation_only_adds_comments() {
        for (lang, aug) in AUGMENTED_REFERENCE_COUNTS {
            let raw = reference_counts(lang, Split::Training);
            assert!(raw.iter().zip(aug).all(|(r, a)| a >= *r));
            // the majority class is never augmented
            assert_eq!(raw[0], aug[0]);
        }
    }

    #[test]
    fn deviation_only_on_mismatch() {
        let d = LabelDistribution::from_counts([3375, 453, 435]);
        assert!(deviation("en train", &d, reference_counts(Language::En, Split::Training)).is_none());
        let w = deviation("en test", &d, reference_counts(Language::En, Split::Testing)).unwrap();
        assert!(w.contains("836") && w.contains("4263"));
    }
}
