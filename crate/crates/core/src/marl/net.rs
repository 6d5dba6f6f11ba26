use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{dot, init_bound, DenseMatrix, GruCellParams, GruTape};

/// Recurrent Q-network of one BS: a GRU over encoded local states followed by
/// a linear head with one output per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNet {
    pub gru: GruCellParams,
    /// `num_actions × hidden`
    pub head: DenseMatrix,
}

/// Gradients share the parameter layout.
pub type QNetGrads = QNet;

impl QNet {
    pub fn uniform<R: Rng + ?Sized>(input: usize, hidden: usize, num_actions: usize, rng: &mut R) -> Self {
        let gru = GruCellParams::uniform(input, hidden, rng);
        let head = DenseMatrix::uniform(num_actions, hidden, init_bound(hidden), rng);
        Self { gru, head }
    }

    pub fn zeros(input: usize, hidden: usize, num_actions: usize) -> Self {
        Self {
            gru: GruCellParams::zeros(input, hidden),
            head: DenseMatrix::zeros(num_actions, hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim(), self.num_actions())
    }

    pub fn input_dim(&self) -> usize {
        self.gru.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.gru.hidden_dim()
    }

    pub fn num_actions(&self) -> usize {
        self.head.rows()
    }

    pub fn validate(&self) -> Result<()> {
        self.gru.validate()?;
        if self.head.cols() != self.hidden_dim() {
            return Err(Error::dim("QNet head", self.hidden_dim(), self.head.cols()));
        }
        Ok(())
    }

    /// GRU matrices in their fixed order followed by the head.
    pub fn matrices(&self) -> [&DenseMatrix; 7] {
        let [a, b, c, d, e, f] = self.gru.matrices();
        [a, b, c, d, e, f, &self.head]
    }

    pub fn matrices_mut(&mut self) -> [&mut DenseMatrix; 7] {
        let [a, b, c, d, e, f] = self.gru.matrices_mut();
        [a, b, c, d, e, f, &mut self.head]
    }

    pub fn is_finite(&self) -> bool {
        self.gru.is_finite() && self.head.is_finite()
    }

    pub fn apply_sgd(&mut self, grads: &QNetGrads, lr: f64) -> Result<()> {
        self.gru.apply_sgd(&grads.gru, lr)?;
        self.head.apply_sgd(&grads.head, lr)
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &QNetGrads) -> Result<()> {
        self.gru.add_scaled(alpha, &other.gru)?;
        self.head.add_scaled(alpha, &other.head)
    }

    /// Zero hidden state for a new episode.
    pub fn initial_hidden(&self) -> Vec<f64> {
        vec![0.0; self.hidden_dim()]
    }

    /// Advances the episode hidden state by one encoded observation.
    pub fn step(&self, hidden: &mut Vec<f64>, input: &[f64]) -> Result<()> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let h = ArrayView2::from_shape((1, hidden.len()), hidden.as_slice()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let cache = self.gru.step(x, h)?;
        *hidden = cache.h_next.row(0).to_vec();
        Ok(())
    }

    /// All Q values for a hidden state.
    pub fn q_values(&self, hidden: &[f64]) -> Result<Vec<f64>> {
        self.head.matvec(hidden)
    }

    /// Q values of the listed actions only.
    pub fn q_for(&self, hidden: &[f64], actions: &[usize]) -> Vec<f64> {
        actions.iter().map(|&a| dot(self.head.row(a), hidden)).collect()
    }

    /// Runs the GRU over a batch of sequences (`inputs[t]` is `batch × input`).
    pub fn unroll(&self, inputs: &[Array2<f64>]) -> Result<GruTape> {
        self.gru.forward_batch(inputs, None)
    }

    pub fn copy_from(&mut self, other: &QNet) {
        self.clone_from(other);
    }
}
