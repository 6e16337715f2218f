use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ModelError;

/// `vocab_size × dim` lookup table. Row 0 belongs to `PAD` and stays zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    weights: Array2<f64>,
}

impl EmbeddingMatrix {
    /// Uniform in ±0.5/dim, PAD row zeroed.
    pub fn random(vocab_size: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let scale = 0.5 / dim as f64;
        let weights =
            Array2::from_shape_simple_fn((vocab_size, dim), || rng.random_range(-scale..scale));
        Self::from_array(weights)
    }

    /// Takes ownership of `weights`, zeroing row 0.
    pub fn from_array(mut weights: Array2<f64>) -> Self {
        if weights.nrows() > 0 {
            weights.row_mut(0).fill(0.0);
        }
        Self { weights }
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn row(&self, id: u32) -> ArrayView1<'_, f64> {
        self.weights.row(id as usize)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    /// Embeds a token sequence, checking every id is in range.
    pub fn lookup(&self, ids: &[u32]) -> Result<Vec<Array1<f64>>, ModelError> {
        ids.iter()
            .map(|&id| {
                if (id as usize) < self.vocab_size() {
                    Ok(self.row(id).to_owned())
                } else {
                    Err(ModelError::Shape(format!(
                        "token id {id} outside an embedding of {} rows",
                        self.vocab_size()
                    )))
                }
            })
            .collect()
    }

    /// Cosine similarity between two rows.
    pub fn cosine(&self, a: u32, b: u32) -> f64 {
        let (x, y) = (self.row(a), self.row(b));
        let denom = x.dot(&x).sqrt() * y.dot(&y).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            x.dot(&y) / denom
        }
    }
}
