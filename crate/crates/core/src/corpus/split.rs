use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, Label};

pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;

/// Stratified, seeded train/validation partition.
///
/// Each label contributes `round(count * fraction)` comments to the
/// validation side. Both sides keep the original comment order.
pub fn split_train_validation(
    corpus: &Corpus,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(validation_fraction));
    }
    let too_small = || CorpusError::TooSmallToSplit {
        size: corpus.len(),
        fraction: validation_fraction,
    };
    if corpus.is_empty() {
        return Err(too_small());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_validation = vec![false; corpus.len()];
    for label in Label::ALL {
        let mut members: Vec<usize> = corpus
            .comments()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.label() == label)
            .map(|(i, _)| i)
            .collect();
        let take = (members.len() as f64 * validation_fraction).round() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..take.min(members.len())] {
            in_validation[i] = true;
        }
    }

    let n_val = in_validation.iter().filter(|&&v| v).count();
    if n_val == 0 || n_val == corpus.len() {
        return Err(too_small());
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (comment, &is_val) in corpus.comments().iter().zip(&in_validation) {
        if is_val {
            val.push(comment.clone());
        } else {
            train.push(comment.clone());
        }
    }
    Ok((
        Corpus::new(train, corpus.split(), corpus.language_tag())?,
        Corpus::new(val, corpus.split(), corpus.language_tag())?,
    ))
}
