//! Gated LSTM cell and its backward pass.
//!
//! Every gate acts on the concatenation `z = [h_{t-1}, x_t]`:
//!
//! ```text
//! f_t  = σ(W_f z + b_f)        i_t = σ(W_i z + b_i)
//! C̃_t  = tanh(W_c z + b_c)     C_t = C_{t-1} * f_t + C̃_t * i_t
//! O_t  = σ(W_o z + b_o)        h_t = O_t * tanh(C_t)
//! ```

use aggrobench_core::features::{EncodingScheme, TokenizedBatch};
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{sigmoid, ParamSet};
use crate::{EmbeddingMatrix, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_f: Array2<f64>,
    pub w_i: Array2<f64>,
    pub w_c: Array2<f64>,
    pub w_o: Array2<f64>,
    pub b_f: Array1<f64>,
    pub b_i: Array1<f64>,
    pub b_c: Array1<f64>,
    pub b_o: Array1<f64>,
    pub hidden_size: usize,
    pub input_size: usize,
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let w = || Array2::zeros((hidden_size, hidden_size + input_size));
        let b = || Array1::zeros(hidden_size);
        Self {
            w_f: w(),
            w_i: w(),
            w_c: w(),
            w_o: w(),
            b_f: b(),
            b_i: b(),
            b_c: b(),
            b_o: b(),
            hidden_size,
            input_size,
        }
    }

    /// Uniform in ±1/√hidden, forget bias 1.
    pub fn random(input_size: usize, hidden_size: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        let k = 1.0 / (hidden_size as f64).sqrt();
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            w.mapv_inplace(|_| rng.random_range(-k..k));
        }
        p.b_f.fill(1.0);
        p
    }

    pub fn check_input(&self, x: ArrayView1<f64>) -> Result<(), ModelError> {
        if x.len() != self.input_size {
            return Err(ModelError::Shape(format!(
                "input of size {} for an LSTM expecting {}",
                x.len(),
                self.input_size
            )));
        }
        Ok(())
    }
}

impl ParamSet for LstmParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_f.as_slice().unwrap(),
            self.w_i.as_slice().unwrap(),
            self.w_c.as_slice().unwrap(),
            self.w_o.as_slice().unwrap(),
            self.b_f.as_slice().unwrap(),
            self.b_i.as_slice().unwrap(),
            self.b_c.as_slice().unwrap(),
            self.b_o.as_slice().unwrap(),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_f.as_slice_mut().unwrap(),
            self.w_i.as_slice_mut().unwrap(),
            self.w_c.as_slice_mut().unwrap(),
            self.w_o.as_slice_mut().unwrap(),
            self.b_f.as_slice_mut().unwrap(),
            self.b_i.as_slice_mut().unwrap(),
            self.b_c.as_slice_mut().unwrap(),
            self.b_o.as_slice_mut().unwrap(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: Array1::zeros(hidden_size),
            c: Array1::zeros(hidden_size),
        }
    }
}

/// Intermediate values of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    z: Array1<f64>,
    f: Array1<f64>,
    i: Array1<f64>,
    c_tilde: Array1<f64>,
    o: Array1<f64>,
    c_prev: Array1<f64>,
    tanh_c: Array1<f64>,
}

fn step_cached(x: ArrayView1<f64>, state: &LstmState, p: &LstmParams) -> (LstmState, StepCache) {
    let z = concatenate(Axis(0), &[state.h.view(), x]).expect("1-d concat");
    let f = (p.w_f.dot(&z) + &p.b_f).mapv(sigmoid);
    let i = (p.w_i.dot(&z) + &p.b_i).mapv(sigmoid);
    let c_tilde = (p.w_c.dot(&z) + &p.b_c).mapv(f64::tanh);
    let c = &state.c * &f + &c_tilde * &i;
    let o = (p.w_o.dot(&z) + &p.b_o).mapv(sigmoid);
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    let cache = StepCache {
        z,
        f,
        i,
        c_tilde,
        o,
        c_prev: state.c.clone(),
        tanh_c,
    };
    (LstmState { h, c }, cache)
}

/// One application of the cell.
pub fn lstm_step(
    x: ArrayView1<f64>,
    state: &LstmState,
    params: &LstmParams,
) -> Result<LstmState, ModelError> {
    params.check_input(x)?;
    if state.h.len() != params.hidden_size || state.c.len() != params.hidden_size {
        return Err(ModelError::Shape(format!(
            "state of size {}/{} for hidden size {}",
            state.h.len(),
            state.c.len(),
            params.hidden_size
        )));
    }
    Ok(step_cached(x, state, params).0)
}

/// States after every step from a zero initial state, plus caches.
pub(crate) fn run_sequence(
    inputs: &[Array1<f64>],
    p: &LstmParams,
) -> (Vec<LstmState>, Vec<StepCache>) {
    let mut state = LstmState::zeros(p.hidden_size);
    let mut states = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (next, cache) = step_cached(x.view(), &state, p);
        states.push(next.clone());
        caches.push(cache);
        state = next;
    }
    (states, caches)
}

/// Backpropagation through time. `dh[t]` is the loss gradient flowing into
/// `h_t` from outside the recurrence. Accumulates parameter gradients into
/// `grads` and returns the input gradients per step.
pub(crate) fn backward_sequence(
    p: &LstmParams,
    caches: &[StepCache],
    dh: &[Array1<f64>],
    grads: &mut LstmParams,
) -> Vec<Array1<f64>> {
    let hs = p.hidden_size;
    let mut dh_next = Array1::<f64>::zeros(hs);
    let mut dc_next = Array1::<f64>::zeros(hs);
    let mut dxs = vec![Array1::zeros(p.input_size); caches.len()];
    for t in (0..caches.len()).rev() {
        let cache = &caches[t];
        let dh_t = &dh[t] + &dh_next;
        let d_o = &dh_t * &cache.tanh_c;
        let dc = &dc_next + &(&dh_t * &cache.o * cache.tanh_c.mapv(|v| 1.0 - v * v));
        let d_f = &dc * &cache.c_prev;
        let d_i = &dc * &cache.c_tilde;
        let d_ct = &dc * &cache.i;
        dc_next = &dc * &cache.f;

        let a_f = &d_f * &cache.f.mapv(|v| v * (1.0 - v));
        let a_i = &d_i * &cache.i.mapv(|v| v * (1.0 - v));
        let a_c = &d_ct * &cache.c_tilde.mapv(|v| 1.0 - v * v);
        let a_o = &d_o * &cache.o.mapv(|v| v * (1.0 - v));

        let z = cache.z.view().insert_axis(Axis(0));
        for (gw, gb, a) in [
            (&mut grads.w_f, &mut grads.b_f, &a_f),
            (&mut grads.w_i, &mut grads.b_i, &a_i),
            (&mut grads.w_c, &mut grads.b_c, &a_c),
            (&mut grads.w_o, &mut grads.b_o, &a_o),
        ] {
            *gw += &a.view().insert_axis(Axis(1)).dot(&z);
            *gb += a;
        }
        let dz = p.w_f.t().dot(&a_f) + p.w_i.t().dot(&a_i) + p.w_c.t().dot(&a_c) + p.w_o.t().dot(&a_o);
        dh_next = dz.slice(s![..hs]).to_owned();
        dxs[t] = dz.slice(s![hs..]).to_owned();
    }
    dxs
}

pub(crate) fn check_word_batch(
    batch: &TokenizedBatch,
    embeddings: &EmbeddingMatrix,
    input_size: usize,
) -> Result<(), ModelError> {
    if batch.scheme != EncodingScheme::WordIndex {
        return Err(ModelError::SchemeMismatch {
            expected: EncodingScheme::WordIndex,
            found: batch.scheme,
        });
    }
    if embeddings.dim() != input_size {
        return Err(ModelError::Shape(format!(
            "embedding dim {} for an LSTM expecting {}",
            embeddings.dim(),
            input_size
        )));
    }
    Ok(())
}

/// Final hidden state of every row, stepping only over unmasked positions.
pub fn lstm_forward(
    batch: &TokenizedBatch,
    embeddings: &EmbeddingMatrix,
    params: &LstmParams,
) -> Result<Vec<Array1<f64>>, ModelError> {
    check_word_batch(batch, embeddings, params.input_size)?;
    (0..batch.len())
        .map(|r| {
            let inputs = embeddings.lookup(batch.row(r))?;
            let (states, _) = run_sequence(&inputs, params);
            Ok(states
                .last()
                .map(|s| s.h.clone())
                .unwrap_or_else(|| Array1::zeros(params.hidden_size)))
        })
        .collect()
}
