//! Bidirectional recurrence with a per-position output combiner.
//!
//! ```text
//! h_f(t) = f(w_f1 x_t + w_f2 h_f(t-1))      forward,  t = 1..n
//! h_b(t) = f(w_b1 x_t + w_b2 h_b(t+1))      backward, t = n..1
//! O_t    = g(w_o1 h_f(t) + w_o2 h_b(t))
//! ```
//!
//! Each direction is either a full gated LSTM or, for checking against the
//! plain recurrence above, a tanh RNN. `g` is an affine map plus softmax.

use aggrobench_core::features::TokenizedBatch;
use ndarray::{concatenate, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::lstm::{check_word_batch, run_sequence, LstmParams};
use crate::nn::softmax;
use crate::{EmbeddingMatrix, ModelError};

/// `h_t = tanh(w_x x_t + w_h h_prev + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainRnnParams {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

impl PlainRnnParams {
    pub fn hidden_size(&self) -> usize {
        self.w_h.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w_x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Recurrence {
    Gated(LstmParams),
    Plain(PlainRnnParams),
}

impl Recurrence {
    pub fn hidden_size(&self) -> usize {
        match self {
            Recurrence::Gated(p) => p.hidden_size,
            Recurrence::Plain(p) => p.hidden_size(),
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            Recurrence::Gated(p) => p.input_size,
            Recurrence::Plain(p) => p.input_size(),
        }
    }

    /// Hidden states after each input, starting from zero.
    fn run(&self, inputs: &[Array1<f64>]) -> Vec<Array1<f64>> {
        match self {
            Recurrence::Gated(p) => run_sequence(inputs, p).0.into_iter().map(|s| s.h).collect(),
            Recurrence::Plain(p) => {
                let mut h = Array1::zeros(p.hidden_size());
                inputs
                    .iter()
                    .map(|x| {
                        h = (p.w_x.dot(x) + p.w_h.dot(&h) + &p.b).mapv(f64::tanh);
                        h.clone()
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub forward: Recurrence,
    pub backward: Recurrence,
    pub w_o1: Array2<f64>,
    pub w_o2: Array2<f64>,
    pub b_o: Array1<f64>,
}

impl BiLstmParams {
    pub fn new(
        forward: Recurrence,
        backward: Recurrence,
        w_o1: Array2<f64>,
        w_o2: Array2<f64>,
        b_o: Array1<f64>,
    ) -> Result<Self, ModelError> {
        let h = forward.hidden_size();
        if backward.hidden_size() != h || forward.input_size() != backward.input_size() {
            return Err(ModelError::Shape(
                "forward and backward directions differ in size".into(),
            ));
        }
        if w_o1.ncols() != h || w_o2.ncols() != h || w_o1.nrows() != w_o2.nrows() {
            return Err(ModelError::Shape("combiner does not match hidden size".into()));
        }
        if b_o.len() != w_o1.nrows() {
            return Err(ModelError::Shape("combiner bias length".into()));
        }
        Ok(Self {
            forward,
            backward,
            w_o1,
            w_o2,
            b_o,
        })
    }

    /// Same weights with the two directions exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            forward: self.backward.clone(),
            backward: self.forward.clone(),
            w_o1: self.w_o2.clone(),
            w_o2: self.w_o1.clone(),
            b_o: self.b_o.clone(),
        }
    }

    pub fn combine(&self, h_f: &Array1<f64>, h_b: &Array1<f64>) -> Array1<f64> {
        let logits = self.w_o1.dot(h_f) + self.w_o2.dot(h_b) + &self.b_o;
        softmax(logits.view())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmOutput {
    /// `h_f(t)` for each position.
    pub forward: Vec<Array1<f64>>,
    /// `h_b(t)` for each position, indexed by the same `t`.
    pub backward: Vec<Array1<f64>>,
    /// `O_t` for each position.
    pub outputs: Vec<Array1<f64>>,
    /// Final forward state (position n) followed by final backward state
    /// (position 1).
    pub representation: Array1<f64>,
}

pub fn bilstm_sequence(
    inputs: &[Array1<f64>],
    params: &BiLstmParams,
) -> Result<BiLstmOutput, ModelError> {
    let size = params.forward.input_size();
    if let Some(x) = inputs.iter().find(|x| x.len() != size) {
        return Err(ModelError::Shape(format!(
            "input of size {} for a BiLSTM expecting {size}",
            x.len()
        )));
    }
    let forward = params.forward.run(inputs);
    let reversed: Vec<Array1<f64>> = inputs.iter().rev().cloned().collect();
    let mut backward = params.backward.run(&reversed);
    backward.reverse();
    let outputs = forward
        .iter()
        .zip(&backward)
        .map(|(f, b)| params.combine(f, b))
        .collect();
    let hidden = params.forward.hidden_size();
    let zero = Array1::zeros(hidden);
    let last_f = forward.last().unwrap_or(&zero);
    let first_b = backward.first().unwrap_or(&zero);
    let representation = concatenate(Axis(0), &[last_f.view(), first_b.view()]).expect("concat");
    Ok(BiLstmOutput {
        forward,
        backward,
        outputs,
        representation,
    })
}

/// Runs every row of a word-index batch over its unmasked positions.
pub fn bilstm_forward(
    batch: &TokenizedBatch,
    embeddings: &EmbeddingMatrix,
    params: &BiLstmParams,
) -> Result<Vec<BiLstmOutput>, ModelError> {
    check_word_batch(batch, embeddings, params.forward.input_size())?;
    (0..batch.len())
        .map(|r| bilstm_sequence(&embeddings.lookup(batch.row(r))?, params))
        .collect()
}
