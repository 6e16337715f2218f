//! Skip-gram word embeddings trained with negative sampling.

use aggrobench_core::corpus::Corpus;
use aggrobench_core::features::{word_tokens, Vocabulary, UNK};
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::sigmoid;
use crate::{EmbeddingMatrix, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting rate, decayed linearly towards 1e-4 of itself.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 2,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

/// Input (centre) and output (context) vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGram {
    pub input: EmbeddingMatrix,
    pub output: Array2<f64>,
}

impl SkipGram {
    /// `u_context · v_centre`, the logit the objective pushes up for observed pairs.
    pub fn affinity(&self, centre: u32, context: u32) -> f64 {
        self.input
            .row(centre)
            .dot(&self.output.row(context as usize))
    }

    pub fn into_embedding(self) -> EmbeddingMatrix {
        self.input
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub loss: f64,
    pub d_centre: Array1<f64>,
    pub d_context: Array1<f64>,
    pub d_negatives: Vec<Array1<f64>>,
}

/// `-log σ(u_o·v_c) - Σ_k log σ(-u_k·v_c)` and its gradients.
pub fn sgns_loss_and_grad(
    centre: ArrayView1<f64>,
    context: ArrayView1<f64>,
    negatives: &[ArrayView1<f64>],
) -> SgnsGrad {
    let pos = sigmoid(context.dot(&centre));
    let mut loss = -pos.max(1e-300).ln();
    // d/ds of -log σ(s) is σ(s) - 1
    let g_pos = pos - 1.0;
    let mut d_centre = context.to_owned() * g_pos;
    let d_context = centre.to_owned() * g_pos;
    let mut d_negatives = Vec::with_capacity(negatives.len());
    for u in negatives {
        let neg = sigmoid(u.dot(&centre));
        loss -= (1.0 - neg).max(1e-300).ln();
        // d/ds of -log σ(-s) is σ(s)
        d_centre = d_centre + u.to_owned() * neg;
        d_negatives.push(centre.to_owned() * neg);
    }
    SgnsGrad {
        loss,
        d_centre,
        d_context,
        d_negatives,
    }
}

/// Cumulative unigram^0.75 table for negative draws.
struct NoiseTable {
    ids: Vec<u32>,
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[usize]) -> Self {
        let mut ids = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (id, &c) in counts.iter().enumerate() {
            if c > 0 {
                total += (c as f64).powf(0.75);
                ids.push(id as u32);
                cumulative.push(total);
            }
        }
        for v in &mut cumulative {
            *v /= total;
        }
        Self { ids, cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.random();
        let k = self.cumulative.partition_point(|&c| c <= u);
        self.ids[k.min(self.ids.len() - 1)]
    }
}

/// Trains on every (centre, context) pair within `window` tokens. Unknown
/// words are skipped. Deterministic for a given seed.
pub fn skipgram_train(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &SkipGramConfig,
) -> Result<SkipGram, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    if config.dim == 0 || config.window == 0 || config.negatives == 0 {
        return Err(ModelError::Config(
            "skip-gram dim, window and negatives must be at least 1".into(),
        ));
    }
    let sentences: Vec<Vec<u32>> = corpus
        .texts()
        .iter()
        .map(|t| {
            word_tokens(t)
                .iter()
                .map(|w| vocab.id_or_unk(w))
                .filter(|&id| id > UNK)
                .collect()
        })
        .collect();
    let mut counts = vec![0usize; vocab.len()];
    for s in &sentences {
        for &id in s {
            counts[id as usize] += 1;
        }
    }
    let distinct = counts.iter().filter(|&&c| c > 0).count();
    if distinct < config.negatives + 1 {
        return Err(ModelError::VocabularyTooSmall {
            words: distinct,
            negatives: config.negatives,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = EmbeddingMatrix::random(vocab.len(), config.dim, &mut rng);
    let mut output = Array2::<f64>::zeros((vocab.len(), config.dim));
    let table = NoiseTable::new(&counts);

    let pairs_per_epoch: usize = sentences
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|i| i.min(config.window) + (s.len() - 1 - i).min(config.window))
                .sum::<usize>()
        })
        .sum();
    let total_steps = (pairs_per_epoch * config.epochs).max(1) as f64;
    let mut step = 0usize;
    let floor = config.learning_rate * 1e-4;
    for _ in 0..config.epochs {
        for s in &sentences {
            for (i, &centre) in s.iter().enumerate() {
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(s.len() - 1);
                for (j, &context) in s.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = (config.learning_rate * (1.0 - step as f64 / total_steps)).max(floor);
                    step += 1;
                    let negs: Vec<u32> = (0..config.negatives)
                        .map(|_| table.sample(&mut rng))
                        .filter(|&n| n != context)
                        .collect();
                    let g = {
                        let neg_rows: Vec<ArrayView1<f64>> =
                            negs.iter().map(|&n| output.row(n as usize)).collect();
                        sgns_loss_and_grad(
                            input.row(centre),
                            output.row(context as usize),
                            &neg_rows,
                        )
                    };
                    {
                        let mut row = output.row_mut(context as usize);
                        row.scaled_add(-lr, &g.d_context);
                    }
                    for (&n, d) in negs.iter().zip(&g.d_negatives) {
                        let mut row = output.row_mut(n as usize);
                        row.scaled_add(-lr, d);
                    }
                    let mut row = input.weights_mut().row_mut(centre as usize);
                    row.scaled_add(-lr, &g.d_centre);
                }
            }
        }
    }
    Ok(SkipGram {
        input: EmbeddingMatrix::from_array(input.weights().clone()),
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use aggrobench_core::corpus::{Label, LabeledComment, Language, LanguageTag, Split};
    use aggrobench_core::features::fit_vocabulary;
    use ndarray::array;

    fn corpus(texts: &[&str]) -> Corpus {
        let comments = texts
            .iter()
            .enumerate()
            .map(|(i, t)| LabeledComment::raw(i.to_string(), t, Label::Nag, Language::En).unwrap())
            .collect();
        Corpus::new(comments, Split::Training, LanguageTag::Single(Language::En)).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = array![0.3, -0.2, 0.5];
        let o = array![0.1, 0.4, -0.3];
        let n1 = array![-0.2, 0.2, 0.1];
        let n2 = array![0.5, -0.1, 0.3];
        let loss = |c: &Array1<f64>, o: &Array1<f64>, n1: &Array1<f64>, n2: &Array1<f64>| {
            sgns_loss_and_grad(c.view(), o.view(), &[n1.view(), n2.view()]).loss
        };
        let g = sgns_loss_and_grad(c.view(), o.view(), &[n1.view(), n2.view()]);
        let eps = 1e-6;
        let check = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
            assert!(rel < 1e-4, "{analytic} vs {numeric}");
        };
        for k in 0..3 {
            let mut d = Array1::zeros(3);
            d[k] = eps;
            check(g.d_centre[k], (loss(&(&c + &d), &o, &n1, &n2) - loss(&(&c - &d), &o, &n1, &n2)) / (2.0 * eps));
            check(g.d_context[k], (loss(&c, &(&o + &d), &n1, &n2) - loss(&c, &(&o - &d), &n1, &n2)) / (2.0 * eps));
            check(g.d_negatives[0][k], (loss(&c, &o, &(&n1 + &d), &n2) - loss(&c, &o, &(&n1 - &d), &n2)) / (2.0 * eps));
            check(g.d_negatives[1][k], (loss(&c, &o, &n1, &(&n2 + &d)) - loss(&c, &o, &n1, &(&n2 - &d))) / (2.0 * eps));
        }
    }

    #[test]
    fn alternating_corpus_links_its_pair() {
        let mut texts = vec!["a b a b a b a b a b a b"; 20];
        texts.extend(["c d e c d e c d e"; 20]);
        let c = corpus(&texts);
        let vocab = fit_vocabulary(&c, 100, 1).unwrap();
        let cfg = SkipGramConfig {
            dim: 8,
            window: 1,
            negatives: 2,
            epochs: 10,
            seed: 3,
            ..SkipGramConfig::default()
        };
        let model = skipgram_train(&c, &vocab, &cfg).unwrap();
        let id = |w: &str| vocab.get(w).unwrap();
        let ab = model.affinity(id("a"), id("b"));
        for other in ["c", "d", "e"] {
            assert!(ab > model.affinity(id("a"), id(other)), "a-b vs a-{other}");
        }
    }

    #[test]
    fn zero_epochs_return_the_seeded_initialisation() {
        let c = corpus(&["x y z w v u"]);
        let vocab = fit_vocabulary(&c, 100, 1).unwrap();
        let cfg = SkipGramConfig {
            dim: 4,
            epochs: 0,
            negatives: 2,
            seed: 9,
            ..SkipGramConfig::default()
        };
        let model = skipgram_train(&c, &vocab, &cfg).unwrap();
        let init = EmbeddingMatrix::random(vocab.len(), 4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(model.input, init);
        let again = skipgram_train(&c, &vocab, &SkipGramConfig { epochs: 2, ..cfg.clone() }).unwrap();
        let twice = skipgram_train(&c, &vocab, &SkipGramConfig { epochs: 2, ..cfg }).unwrap();
        assert_eq!(again, twice);
    }

    #[test]
    fn too_few_words_for_the_negatives() {
        let c = corpus(&["x y x y"]);
        let vocab = fit_vocabulary(&c, 100, 1).unwrap();
        let cfg = SkipGramConfig {
            negatives: 5,
            ..SkipGramConfig::default()
        };
        assert!(matches!(
            skipgram_train(&c, &vocab, &cfg),
            Err(ModelError::VocabularyTooSmall { words: 2, negatives: 5 })
        ));
    }
}
