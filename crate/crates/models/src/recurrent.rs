//! Embedding → (Bi)LSTM → softmax head, with exact gradients.

use aggrobench_core::features::PAD;
use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bilstm::{BiLstmParams, Recurrence};
use crate::lstm::{backward_sequence, run_sequence, LstmParams, StepCache};
use crate::nn::{cross_entropy, softmax, ParamSet};
use crate::{EmbeddingMatrix, ModelError};

pub const NUM_CLASSES: usize = 3;

/// Recurrent sequence classifier. With a backward LSTM the head sees
/// `[h_f(n), h_b(1)]` and plays the role of the BiLSTM output combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentNet {
    pub embedding: Array2<f64>,
    pub forward: LstmParams,
    pub backward: Option<LstmParams>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

/// Which part of the network a parameter tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Embedding,
    Encoder,
    Head,
}

struct Trace {
    ids: Vec<u32>,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
    rep: Array1<f64>,
}

impl RecurrentNet {
    pub fn random(
        vocab_size: usize,
        embedding_dim: usize,
        hidden_size: usize,
        bidirectional: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let embedding = EmbeddingMatrix::random(vocab_size, embedding_dim, rng);
        let forward = LstmParams::random(embedding_dim, hidden_size, rng);
        let backward = bidirectional.then(|| LstmParams::random(embedding_dim, hidden_size, rng));
        let rep = hidden_size * if bidirectional { 2 } else { 1 };
        let k = 1.0 / (rep as f64).sqrt();
        let head_w = Array2::from_shape_simple_fn((NUM_CLASSES, rep), || rng.random_range(-k..k));
        Self {
            embedding: embedding.weights().clone(),
            forward,
            backward,
            head_w,
            head_b: Array1::zeros(NUM_CLASSES),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size
    }

    pub fn representation_size(&self) -> usize {
        self.head_w.ncols()
    }

    pub fn embedding_matrix(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::from_array(self.embedding.clone())
    }

    /// The network viewed as gated BiLSTM parameters (head split into
    /// `w_o1`, `w_o2`). `None` for a unidirectional network.
    pub fn bilstm_params(&self) -> Option<BiLstmParams> {
        let backward = self.backward.clone()?;
        let h = self.hidden_size();
        BiLstmParams::new(
            Recurrence::Gated(self.forward.clone()),
            Recurrence::Gated(backward),
            self.head_w.slice(s![.., ..h]).to_owned(),
            self.head_w.slice(s![.., h..]).to_owned(),
            self.head_b.clone(),
        )
        .ok()
    }

    /// Group of each tensor, in `ParamSet::tensors` order.
    pub fn groups(&self) -> Vec<ParamGroup> {
        let mut g = vec![ParamGroup::Embedding];
        let per_lstm = 8;
        let lstms = 1 + usize::from(self.backward.is_some());
        g.extend(std::iter::repeat_n(ParamGroup::Encoder, per_lstm * lstms));
        g.extend([ParamGroup::Head, ParamGroup::Head]);
        g
    }

    fn trace(&self, ids: &[u32]) -> Result<Trace, ModelError> {
        let vocab = self.vocab_size();
        if let Some(bad) = ids.iter().find(|&&id| id as usize >= vocab) {
            return Err(ModelError::Shape(format!(
                "token id {bad} outside an embedding of {vocab} rows"
            )));
        }
        let inputs: Vec<Array1<f64>> = ids
            .iter()
            .map(|&id| self.embedding.row(id as usize).to_owned())
            .collect();
        let h = self.hidden_size();
        let (states, fwd) = run_sequence(&inputs, &self.forward);
        let last_f = states.last().map(|s| s.h.clone()).unwrap_or_else(|| Array1::zeros(h));
        let (rep, bwd) = match &self.backward {
            None => (last_f, Vec::new()),
            Some(b) => {
                let reversed: Vec<Array1<f64>> = inputs.iter().rev().cloned().collect();
                let (states, caches) = run_sequence(&reversed, b);
                let first_b = states.last().map(|s| s.h.clone()).unwrap_or_else(|| Array1::zeros(h));
                let rep = concatenate(Axis(0), &[last_f.view(), first_b.view()]).expect("concat");
                (rep, caches)
            }
        };
        Ok(Trace {
            ids: ids.to_vec(),
            fwd,
            bwd,
            rep,
        })
    }

    /// The encoder's sequence representation.
    pub fn representation(&self, ids: &[u32]) -> Result<Array1<f64>, ModelError> {
        Ok(self.trace(ids)?.rep)
    }

    pub fn logits(&self, ids: &[u32]) -> Result<Array1<f64>, ModelError> {
        let rep = self.representation(ids)?;
        Ok(self.head_w.dot(&rep) + &self.head_b)
    }

    pub fn probabilities(&self, ids: &[u32]) -> Result<Array1<f64>, ModelError> {
        Ok(softmax(self.logits(ids)?.view()))
    }

    /// Cross-entropy on one sequence; adds its gradient to `grads`.
    /// `dropout` is an inverted-dropout mask over the representation.
    pub fn loss_and_grad(
        &self,
        ids: &[u32],
        gold: usize,
        dropout: Option<&Array1<f64>>,
        grads: &mut RecurrentNet,
    ) -> Result<(f64, Array1<f64>), ModelError> {
        let trace = self.trace(ids)?;
        let rep = match dropout {
            Some(mask) => &trace.rep * mask,
            None => trace.rep.clone(),
        };
        let probs = softmax((self.head_w.dot(&rep) + &self.head_b).view());
        let loss = cross_entropy(probs.view(), gold);
        let mut dlogits = probs.clone();
        dlogits[gold] -= 1.0;
        grads.head_w += &dlogits
            .view()
            .insert_axis(Axis(1))
            .dot(&rep.view().insert_axis(Axis(0)));
        grads.head_b += &dlogits;
        let mut drep = self.head_w.t().dot(&dlogits);
        if let Some(mask) = dropout {
            drep *= mask;
        }
        self.backprop_encoder(&trace, &drep, grads);
        Ok((loss, probs))
    }

    fn backprop_encoder(&self, trace: &Trace, drep: &Array1<f64>, grads: &mut RecurrentNet) {
        let n = trace.ids.len();
        if n == 0 {
            return;
        }
        let h = self.hidden_size();
        let mut dh = vec![Array1::zeros(h); n];
        dh[n - 1] = drep.slice(s![..h]).to_owned();
        let mut dxs = backward_sequence(&self.forward, &trace.fwd, &dh, &mut grads.forward);
        if let (Some(b), Some(gb)) = (&self.backward, grads.backward.as_mut()) {
            dh[n - 1] = drep.slice(s![h..]).to_owned();
            let rev = backward_sequence(b, &trace.bwd, &dh, gb);
            for (t, dx) in rev.into_iter().rev().enumerate() {
                dxs[t] += &dx;
            }
        }
        for (&id, dx) in trace.ids.iter().zip(dxs) {
            if id != PAD {
                let mut row = grads.embedding.row_mut(id as usize);
                row += &dx;
            }
        }
    }
}

impl ParamSet for RecurrentNet {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.embedding.as_slice().unwrap()];
        t.extend(self.forward.tensors());
        if let Some(b) = &self.backward {
            t.extend(b.tensors());
        }
        t.push(self.head_w.as_slice().unwrap());
        t.push(self.head_b.as_slice().unwrap());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![self.embedding.as_slice_mut().unwrap()];
        t.extend(self.forward.tensors_mut());
        if let Some(b) = &mut self.backward {
            t.extend(b.tensors_mut());
        }
        t.push(self.head_w.as_slice_mut().unwrap());
        t.push(self.head_b.as_slice_mut().unwrap());
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilstm::bilstm_sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn finite_difference_check(net: &RecurrentNet, ids: &[u32], gold: usize) {
        let mut grads = net.zeroed();
        net.loss_and_grad(ids, gold, None, &mut grads).unwrap();
        let loss = |n: &RecurrentNet| cross_entropy(n.probabilities(ids).unwrap().view(), gold);
        let eps = 1e-6;
        let analytic = grads.tensors().concat();
        let mut k = 0;
        for t in 0..net.tensors().len() {
            for j in 0..net.tensors()[t].len() {
                let mut plus = net.clone();
                plus.tensors_mut()[t][j] += eps;
                let mut minus = net.clone();
                minus.tensors_mut()[t][j] -= eps;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                let a = analytic[k];
                let scale = a.abs().max(numeric.abs());
                assert!(
                    (a - numeric).abs() <= 1e-4 * scale || (a - numeric).abs() < 1e-8,
                    "tensor {t} entry {j}: {a} vs {numeric}"
                );
                k += 1;
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bidirectional in [false, true] {
            let net = RecurrentNet::random(6, 3, 4, bidirectional, &mut rng);
            finite_difference_check(&net, &[2, 5, 1, 3], 1);
        }
        let scalar = RecurrentNet::random(3, 1, 1, false, &mut rng);
        finite_difference_check(&scalar, &[1, 2, 2], 2);
    }

    #[test]
    fn head_over_bilstm_is_the_output_combiner() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = RecurrentNet::random(5, 3, 4, true, &mut rng);
        let ids = [1, 4, 2];
        let inputs = net.embedding_matrix().lookup(&ids).unwrap();
        let out = bilstm_sequence(&inputs, &net.bilstm_params().unwrap()).unwrap();
        assert_eq!(out.representation, net.representation(&ids).unwrap());
        let probs = net.probabilities(&ids).unwrap();
        let combined = net
            .bilstm_params()
            .unwrap()
            .combine(out.forward.last().unwrap(), &out.backward[0]);
        assert!((&probs - &combined).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        let net = RecurrentNet::random(4, 2, 2, false, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(net.logits(&[4]).is_err());
        assert!(net.logits(&[]).is_ok());
    }
}
