//! Small numeric helpers shared by the hand-written recurrent models.

use ndarray::{Array1, ArrayView1};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy of `probs` against class `gold`, floored to stay finite.
pub fn cross_entropy(probs: ArrayView1<f64>, gold: usize) -> f64 {
    -probs[gold].max(1e-300).ln()
}

/// A bundle of dense parameter tensors that can double as its own gradient
/// container.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Adam with per-tensor first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update. `mask[k] == false` leaves tensor `k` untouched.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P, mask: Option<&[bool]>) {
        let grads = grads.tensors();
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (k, (p, g)) in params.tensors_mut().into_iter().zip(grads).enumerate() {
            if mask.is_some_and(|m| !m[k]) {
                continue;
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let update = (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
                p[j] -= self.learning_rate * update;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let p = softmax(array![2.0, 2.0, 2.0].view());
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(argmax(p.as_slice().unwrap()), 0);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax(array![1000.0, 0.0, -1000.0].view());
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!(p[0] > 0.999);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [-30.0, -1.5, 0.3, 8.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.0]), 0);
    }
}
