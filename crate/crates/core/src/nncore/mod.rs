//! Minimal neural-network kernel shared by the state predictor and the
//! per-base-station Q-networks: a row-major dense matrix, the GRU cell with
//! analytic backpropagation through time, and plain SGD.
//!
//! All arithmetic is `f64`. The GRU has no bias terms.

mod gru;

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gru::{
    gru_cell_forward, gru_sequence_backward, gru_sequence_forward, GateWeights, GruCellParams,
    GruGradients, GruStepCache, GruTape,
};

/// Learning rate used for the state predictor.
pub const DEFAULT_PREDICTOR_LR: f64 = 1e-3;
/// Learning rate used for the Q-networks.
pub const DEFAULT_Q_LR: f64 = 1e-4;

/// Row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct DenseMatrix(Array2<f64>);

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TryFrom<MatrixRecord> for DenseMatrix {
    type Error = Error;

    fn try_from(r: MatrixRecord) -> Result<Self> {
        DenseMatrix::from_vec(r.rows, r.cols, r.entries)
    }
}

impl From<DenseMatrix> for MatrixRecord {
    fn from(m: DenseMatrix) -> Self {
        let (rows, cols) = m.0.dim();
        MatrixRecord {
            rows,
            cols,
            entries: m.0.into_iter().collect(),
        }
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix(Array2::zeros((rows, cols)))
    }

    pub fn from_vec(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dim("DenseMatrix::from_vec", rows * cols, entries.len()));
        }
        Array2::from_shape_vec((rows, cols), entries)
            .map(DenseMatrix)
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Entries drawn uniformly from `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let entries = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        DenseMatrix(Array2::from_shape_vec((rows, cols), entries).expect("shape"))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[(r, c)]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.0[(r, c)] = v;
    }

    pub fn entries(&self) -> &[f64] {
        self.0.as_slice().expect("standard layout")
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        self.0.as_slice_mut().expect("standard layout")
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.entries()[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.entries_mut()[r * c..(r + 1) * c]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn array_mut(&mut self) -> &mut Array2<f64> {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self · v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols() {
            return Err(Error::dim("DenseMatrix::matvec", self.cols(), v.len()));
        }
        Ok((0..self.rows()).map(|r| dot(self.row(r), v)).collect())
    }

    /// In-place `self -= lr * grad`.
    pub fn apply_sgd(&mut self, grad: &DenseMatrix, lr: f64) -> Result<()> {
        check_sgd_args(self, grad, lr)?;
        self.0.scaled_add(-lr, &grad.0);
        Ok(())
    }

    /// In-place `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                "DenseMatrix::add_scaled",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        self.0.scaled_add(alpha, &other.0);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.mapv_inplace(|v| v * alpha);
    }
}

impl From<Array2<f64>> for DenseMatrix {
    fn from(a: Array2<f64>) -> Self {
        // Force standard (row-major) layout.
        if a.is_standard_layout() {
            DenseMatrix(a)
        } else {
            DenseMatrix(a.as_standard_layout().into_owned())
        }
    }
}

fn check_sgd_args(param: &DenseMatrix, grad: &DenseMatrix, lr: f64) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::dim(
            "sgd_step",
            format!("{:?}", param.shape()),
            format!("{:?}", grad.shape()),
        ));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("sgd_step gradient"));
    }
    Ok(())
}

/// Returns `param - lr * grad`.
pub fn sgd_step(param: &DenseMatrix, grad: &DenseMatrix, lr: f64) -> Result<DenseMatrix> {
    let mut out = param.clone();
    out.apply_sgd(grad, lr)?;
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Initialization bound `1/sqrt(hidden)`.
pub fn init_bound(hidden: usize) -> f64 {
    1.0 / (hidden as f64).sqrt()
}

/// Writes any serializable checkpoint as pretty JSON.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sgd_zero_grad_is_identity() {
        let p = DenseMatrix::from_vec(2, 2, vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        let g = DenseMatrix::zeros(2, 2);
        assert_eq!(sgd_step(&p, &g, 0.1).unwrap(), p);
    }

    #[test]
    fn sgd_single_entry() {
        let p = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let g = DenseMatrix::from_vec(1, 1, vec![2.0]).unwrap();
        assert_eq!(sgd_step(&p, &g, 0.5).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn sgd_rejects_bad_inputs() {
        let p = DenseMatrix::zeros(2, 2);
        let g = DenseMatrix::from_vec(2, 2, vec![0.0, f64::NAN, 0.0, 0.0]).unwrap();
        assert!(matches!(sgd_step(&p, &g, 0.1), Err(Error::NonFinite(_))));
        assert!(sgd_step(&p, &DenseMatrix::zeros(1, 2), 0.1).is_err());
        assert!(sgd_step(&p, &DenseMatrix::zeros(2, 2), 0.0).is_err());
        assert!(sgd_step(&p, &DenseMatrix::zeros(2, 2), -1.0).is_err());
    }

    #[test]
    fn default_learning_rates() {
        assert_eq!(DEFAULT_PREDICTOR_LR, 1e-3);
        assert_eq!(DEFAULT_Q_LR, 1e-4);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(DenseMatrix::from_vec(2, 3, vec![0.0; 5]).is_err());
        let m = DenseMatrix::from_vec(2, 3, (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(m.matvec(&[1.0, 0.0, 1.0]).unwrap(), vec![2.0, 8.0]);
    }

    #[test]
    fn uniform_init_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DenseMatrix::uniform(16, 16, init_bound(16), &mut rng);
        assert!(m.max_abs() <= 0.25);
        assert!(m.max_abs() > 0.1);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = DenseMatrix::uniform(rows, cols, 1e3, &mut rng);
            m.set(0, 0, 1e-300 * (seed as f64));
            let text = serde_json::to_string(&m).unwrap();
            let back: DenseMatrix = serde_json::from_str(&text).unwrap();
            for (a, b) in m.entries().iter().zip(back.entries()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
