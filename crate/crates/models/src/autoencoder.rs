//! Sequence autoencoder: an LSTM encoder reads the tokens, a second LSTM fed
//! the final encoder state at every step reproduces them.

use aggrobench_core::features::PAD;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lstm::{backward_sequence, run_sequence, LstmParams};
use crate::nn::{argmax, cross_entropy, softmax, Adam, ParamSet};
use crate::{EmbeddingMatrix, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceAutoencoder {
    pub embedding: Array2<f64>,
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-2,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Trained autoencoder and its per-epoch mean token loss.
#[derive(Debug, Clone)]
pub struct AutoencoderPretraining {
    pub model: SequenceAutoencoder,
    pub loss_curve: Vec<f64>,
}

impl SequenceAutoencoder {
    pub fn random(vocab_size: usize, embedding_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let embedding = EmbeddingMatrix::random(vocab_size, embedding_dim, rng).weights().clone();
        let encoder = LstmParams::random(embedding_dim, hidden, rng);
        let decoder = LstmParams::random(hidden, hidden, rng);
        let k = 1.0 / (hidden as f64).sqrt();
        let out_w = Array2::from_shape_simple_fn((vocab_size, hidden), || rng.random_range(-k..k));
        Self {
            embedding,
            encoder,
            decoder,
            out_w,
            out_b: Array1::zeros(vocab_size),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    fn inputs(&self, ids: &[u32]) -> Result<Vec<Array1<f64>>, ModelError> {
        ids.iter()
            .map(|&id| {
                if (id as usize) < self.vocab_size() {
                    Ok(self.embedding.row(id as usize).to_owned())
                } else {
                    Err(ModelError::Shape(format!("token id {id} outside the vocabulary")))
                }
            })
            .collect()
    }

    /// Final encoder state.
    pub fn encode(&self, ids: &[u32]) -> Result<Array1<f64>, ModelError> {
        let (states, _) = run_sequence(&self.inputs(ids)?, &self.encoder);
        Ok(states
            .last()
            .map(|s| s.h.clone())
            .unwrap_or_else(|| Array1::zeros(self.encoder.hidden_size)))
    }

    /// Most likely token at each position of the reconstruction.
    pub fn reconstruct(&self, ids: &[u32]) -> Result<Vec<u32>, ModelError> {
        let code = self.encode(ids)?;
        let (states, _) = run_sequence(&vec![code; ids.len()], &self.decoder);
        Ok(states
            .iter()
            .map(|s| {
                let logits = self.out_w.dot(&s.h) + &self.out_b;
                argmax(logits.as_slice().unwrap()) as u32
            })
            .collect())
    }

    /// Share of tokens reproduced exactly.
    pub fn reconstruction_accuracy(&self, sequences: &[Vec<u32>]) -> Result<f64, ModelError> {
        let (mut hit, mut total) = (0usize, 0usize);
        for s in sequences {
            let r = self.reconstruct(s)?;
            hit += r.iter().zip(s).filter(|(a, b)| a == b).count();
            total += s.len();
        }
        Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
    }

    /// Summed token cross-entropy; adds the gradient to `grads`.
    pub fn loss_and_grad(&self, ids: &[u32], grads: &mut Self) -> Result<f64, ModelError> {
        let n = ids.len();
        if n == 0 {
            return Ok(0.0);
        }
        let inputs = self.inputs(ids)?;
        let (enc_states, enc_caches) = run_sequence(&inputs, &self.encoder);
        let code = enc_states[n - 1].h.clone();
        let (dec_states, dec_caches) = run_sequence(&vec![code; n], &self.decoder);
        let mut loss = 0.0;
        let mut dh_dec = Vec::with_capacity(n);
        for (state, &gold) in dec_states.iter().zip(ids) {
            let probs = softmax((self.out_w.dot(&state.h) + &self.out_b).view());
            loss += cross_entropy(probs.view(), gold as usize);
            let mut dl = probs;
            dl[gold as usize] -= 1.0;
            grads.out_w += &dl
                .view()
                .insert_axis(Axis(1))
                .dot(&state.h.view().insert_axis(Axis(0)));
            grads.out_b += &dl;
            dh_dec.push(self.out_w.t().dot(&dl));
        }
        let dcode: Array1<f64> = backward_sequence(&self.decoder, &dec_caches, &dh_dec, &mut grads.decoder)
            .into_iter()
            .fold(Array1::zeros(self.encoder.hidden_size), |acc, d| acc + d);
        let mut dh_enc = vec![Array1::zeros(self.encoder.hidden_size); n];
        dh_enc[n - 1] = dcode;
        let dxs = backward_sequence(&self.encoder, &enc_caches, &dh_enc, &mut grads.encoder);
        for (&id, dx) in ids.iter().zip(dxs) {
            if id != PAD {
                let mut row = grads.embedding.row_mut(id as usize);
                row += &dx;
            }
        }
        Ok(loss)
    }
}

impl ParamSet for SequenceAutoencoder {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.embedding.as_slice().unwrap()];
        t.extend(self.encoder.tensors());
        t.extend(self.decoder.tensors());
        t.push(self.out_w.as_slice().unwrap());
        t.push(self.out_b.as_slice().unwrap());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![self.embedding.as_slice_mut().unwrap()];
        t.extend(self.encoder.tensors_mut());
        t.extend(self.decoder.tensors_mut());
        t.push(self.out_w.as_slice_mut().unwrap());
        t.push(self.out_b.as_slice_mut().unwrap());
        t
    }
}

/// Trains `model` to reproduce `sequences` with Adam. Fails with the epoch
/// index if the loss stops being finite.
pub fn autoencoder_fit(
    mut model: SequenceAutoencoder,
    sequences: &[Vec<u32>],
    config: &AutoencoderConfig,
) -> Result<AutoencoderPretraining, ModelError> {
    let usable: Vec<&Vec<u32>> = sequences.iter().filter(|s| !s.is_empty()).collect();
    if usable.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut tokens) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut grads = model.zeroed();
            let mut batch_tokens = 0;
            for &k in batch {
                total += model.loss_and_grad(usable[k], &mut grads)?;
                batch_tokens += usable[k].len();
            }
            tokens += batch_tokens;
            grads.scale(1.0 / batch_tokens as f64);
            adam.step(&mut model, &grads, None);
        }
        let mean = total / tokens as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        loss_curve.push(mean);
    }
    Ok(AutoencoderPretraining { model, loss_curve })
}
