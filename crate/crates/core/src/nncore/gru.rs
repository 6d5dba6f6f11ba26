use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init_bound, sigmoid, DenseMatrix};
use crate::error::{Error, Result};

/// Input and recurrent weights of one gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateWeights {
    /// `hidden × input`
    pub w: DenseMatrix,
    /// `hidden × hidden`
    pub u: DenseMatrix,
}

impl GateWeights {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: DenseMatrix::zeros(hidden, input),
            u: DenseMatrix::zeros(hidden, hidden),
        }
    }

    fn uniform<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let b = init_bound(hidden);
        Self {
            w: DenseMatrix::uniform(hidden, input, b, rng),
            u: DenseMatrix::uniform(hidden, hidden, b, rng),
        }
    }
}

/// GRU cell weights: reset gate, update gate and candidate state.
///
/// ```text
/// r  = σ(W_r x + U_r h)
/// c  = tanh(W_c x + U_c (h ⊙ r))
/// z  = σ(W_z x + U_z h)
/// h' = (1 - z) ⊙ c + z ⊙ h
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub reset: GateWeights,
    pub update: GateWeights,
    pub candidate: GateWeights,
}

/// Gradients have the same layout as the parameters.
pub type GruGradients = GruCellParams;

/// Cached intermediates of one (batched) cell step. Rows are batch items.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub input: Array2<f64>,
    pub h_prev: Array2<f64>,
    pub reset: Array2<f64>,
    pub update: Array2<f64>,
    pub candidate: Array2<f64>,
    pub h_next: Array2<f64>,
}

/// Per-step caches of an unrolled sequence.
#[derive(Debug, Clone, Default)]
pub struct GruTape {
    pub steps: Vec<GruStepCache>,
}

impl GruTape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Hidden state after step `t` (batch × hidden).
    pub fn hidden(&self, t: usize) -> &Array2<f64> {
        &self.steps[t].h_next
    }

    pub fn final_hidden(&self) -> Option<&Array2<f64>> {
        self.steps.last().map(|s| &s.h_next)
    }
}

impl GruCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            reset: GateWeights::zeros(input, hidden),
            update: GateWeights::zeros(input, hidden),
            candidate: GateWeights::zeros(input, hidden),
        }
    }

    /// Uniform initialization in `[-1/sqrt(hidden), 1/sqrt(hidden)]`.
    pub fn uniform<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            reset: GateWeights::uniform(input, hidden, rng),
            update: GateWeights::uniform(input, hidden, rng),
            candidate: GateWeights::uniform(input, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.reset.w.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.reset.w.rows()
    }

    /// Checks that all three gates share the same dimensions.
    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        for g in [&self.reset, &self.update, &self.candidate] {
            if g.w.shape() != (h, d) {
                return Err(Error::dim("GRU input weights", format!("{h}x{d}"), format!("{:?}", g.w.shape())));
            }
            if g.u.shape() != (h, h) {
                return Err(Error::dim("GRU recurrent weights", format!("{h}x{h}"), format!("{:?}", g.u.shape())));
            }
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim())
    }

    /// The six matrices in a fixed order: W_r, U_r, W_z, U_z, W_c, U_c.
    pub fn matrices(&self) -> [&DenseMatrix; 6] {
        [
            &self.reset.w,
            &self.reset.u,
            &self.update.w,
            &self.update.u,
            &self.candidate.w,
            &self.candidate.u,
        ]
    }

    pub fn matrices_mut(&mut self) -> [&mut DenseMatrix; 6] {
        [
            &mut self.reset.w,
            &mut self.reset.u,
            &mut self.update.w,
            &mut self.update.u,
            &mut self.candidate.w,
            &mut self.candidate.u,
        ]
    }

    pub const MATRIX_NAMES: [&'static str; 6] = ["W_r", "U_r", "W_z", "U_z", "W_c", "U_c"];

    pub fn add_scaled(&mut self, alpha: f64, other: &GruCellParams) -> Result<()> {
        for (a, b) in self.matrices_mut().into_iter().zip(other.matrices()) {
            a.add_scaled(alpha, b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for m in self.matrices_mut() {
            m.scale(alpha);
        }
    }

    pub fn apply_sgd(&mut self, grads: &GruGradients, lr: f64) -> Result<()> {
        for (p, g) in self.matrices_mut().into_iter().zip(grads.matrices()) {
            p.apply_sgd(g, lr)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }

    /// One batched cell step. `x` is `batch × input`, `h_prev` is `batch × hidden`.
    pub fn step(&self, x: ArrayView2<'_, f64>, h_prev: ArrayView2<'_, f64>) -> Result<GruStepCache> {
        let (batch, hidden) = (x.nrows(), self.hidden_dim());
        if x.ncols() != self.input_dim() {
            return Err(Error::dim("GRU step input", self.input_dim(), x.ncols()));
        }
        if h_prev.dim() != (batch, hidden) {
            return Err(Error::dim("GRU step hidden", format!("{batch}x{hidden}"), format!("{:?}", h_prev.dim())));
        }

        let mut reset = x.dot(&self.reset.w.view().t());
        general_mat_mul(1.0, &h_prev, &self.reset.u.view().t(), 1.0, &mut reset);
        reset.mapv_inplace(sigmoid);

        let mut update = x.dot(&self.update.w.view().t());
        general_mat_mul(1.0, &h_prev, &self.update.u.view().t(), 1.0, &mut update);
        update.mapv_inplace(sigmoid);

        let gated = &h_prev * &reset;
        let mut candidate = x.dot(&self.candidate.w.view().t());
        general_mat_mul(1.0, &gated, &self.candidate.u.view().t(), 1.0, &mut candidate);
        candidate.mapv_inplace(f64::tanh);

        let mut h_next = Array2::zeros((batch, hidden));
        Zip::from(&mut h_next)
            .and(&update)
            .and(&candidate)
            .and(&h_prev)
            .for_each(|h, &z, &c, &hp| *h = (1.0 - z) * c + z * hp);

        Ok(GruStepCache {
            input: x.to_owned(),
            h_prev: h_prev.to_owned(),
            reset,
            update,
            candidate,
            h_next,
        })
    }

    /// Unrolls the cell over `inputs` (each `batch × input`) from `h0`
    /// (zero state when `None`).
    pub fn forward_batch(&self, inputs: &[Array2<f64>], h0: Option<ArrayView2<'_, f64>>) -> Result<GruTape> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::InvalidArgument("GRU sequence must be non-empty".into()))?;
        let batch = first.nrows();
        let mut h = match h0 {
            Some(h) => h.to_owned(),
            None => Array2::zeros((batch, self.hidden_dim())),
        };
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            if x.nrows() != batch {
                return Err(Error::dim("GRU sequence batch", batch, x.nrows()));
            }
            let cache = self.step(x.view(), h.view())?;
            h = cache.h_next.clone();
            steps.push(cache);
        }
        Ok(GruTape { steps })
    }

    /// Backpropagation through time. `inject(t)` returns the gradient of the
    /// loss with respect to the hidden state after step `t` (if any); the
    /// recurrent contribution from later steps is added internally.
    pub fn backward_batch<F>(&self, tape: &GruTape, mut inject: F) -> Result<GruGradients>
    where
        F: FnMut(usize) -> Option<Array2<f64>>,
    {
        let Some(last) = tape.steps.last() else {
            return Err(Error::InvalidArgument("empty GRU tape".into()));
        };
        let (batch, hidden) = last.h_next.dim();
        if hidden != self.hidden_dim() || last.input.ncols() != self.input_dim() {
            return Err(Error::dim(
                "GRU tape/params",
                format!("{}x{}", self.hidden_dim(), self.input_dim()),
                format!("{}x{}", hidden, last.input.ncols()),
            ));
        }
        let mut grads = self.zeros_like();
        let mut dh: Array2<f64> = Array2::zeros((batch, hidden));

        for t in (0..tape.len()).rev() {
            if let Some(g) = inject(t) {
                if g.dim() != dh.dim() {
                    return Err(Error::dim("GRU hidden gradient", format!("{:?}", dh.dim()), format!("{:?}", g.dim())));
                }
                dh += &g;
            }
            let s = &tape.steps[t];

            // Pre-activation gradients.
            let mut da_c = Array2::zeros((batch, hidden));
            let mut da_z = Array2::zeros((batch, hidden));
            Zip::from(&mut da_c)
                .and(&mut da_z)
                .and(&dh)
                .and(&s.update)
                .and(&s.candidate)
                .and(&s.h_prev)
                .for_each(|dac, daz, &g, &z, &c, &hp| {
                    *dac = g * (1.0 - z) * (1.0 - c * c);
                    *daz = g * (hp - c) * z * (1.0 - z);
                });

            let gated = &s.h_prev * &s.reset;
            general_mat_mul(1.0, &da_c.t(), &s.input, 1.0, grads.candidate.w.array_mut());
            general_mat_mul(1.0, &da_c.t(), &gated, 1.0, grads.candidate.u.array_mut());
            let d_gated = da_c.dot(self.candidate.u.array());

            let mut da_r = Array2::zeros((batch, hidden));
            Zip::from(&mut da_r)
                .and(&d_gated)
                .and(&s.h_prev)
                .and(&s.reset)
                .for_each(|dar, &dg, &hp, &r| *dar = dg * hp * r * (1.0 - r));

            general_mat_mul(1.0, &da_z.t(), &s.input, 1.0, grads.update.w.array_mut());
            general_mat_mul(1.0, &da_z.t(), &s.h_prev, 1.0, grads.update.u.array_mut());
            general_mat_mul(1.0, &da_r.t(), &s.input, 1.0, grads.reset.w.array_mut());
            general_mat_mul(1.0, &da_r.t(), &s.h_prev, 1.0, grads.reset.u.array_mut());

            let mut dh_prev = &dh * &s.update;
            dh_prev += &(&d_gated * &s.reset);
            general_mat_mul(1.0, &da_z, self.update.u.array(), 1.0, &mut dh_prev);
            general_mat_mul(1.0, &da_r, self.reset.u.array(), 1.0, &mut dh_prev);
            dh = dh_prev;
        }
        Ok(grads)
    }
}

fn row(v: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((1, v.len()), v).expect("row view")
}

/// Single-vector cell step.
pub fn gru_cell_forward(params: &GruCellParams, input: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, GruStepCache)> {
    let cache = params.step(row(input), row(h_prev))?;
    Ok((cache.h_next.row(0).to_vec(), cache))
}

/// Runs the cell over `inputs` from a zero state and applies the output map
/// `out_weights · h_K`.
pub fn gru_sequence_forward(
    params: &GruCellParams,
    out_weights: &DenseMatrix,
    inputs: &[Vec<f64>],
) -> Result<(Vec<f64>, GruTape)> {
    if out_weights.cols() != params.hidden_dim() {
        return Err(Error::dim("GRU output weights", params.hidden_dim(), out_weights.cols()));
    }
    let batched: Vec<Array2<f64>> = inputs.iter().map(|x| row(x).to_owned()).collect();
    let tape = params.forward_batch(&batched, None)?;
    let h = tape.final_hidden().expect("non-empty").row(0).to_vec();
    Ok((out_weights.matvec(&h)?, tape))
}

/// Gradients of a scalar loss whose gradient at the sequence output is
/// `output_grad`, for the cell weights and the output weights.
pub fn gru_sequence_backward(
    tape: &GruTape,
    params: &GruCellParams,
    out_weights: &DenseMatrix,
    output_grad: &[f64],
) -> Result<(GruGradients, DenseMatrix)> {
    let h = tape
        .final_hidden()
        .ok_or_else(|| Error::InvalidArgument("empty GRU tape".into()))?;
    if h.nrows() != 1 {
        return Err(Error::dim("gru_sequence_backward batch", 1, h.nrows()));
    }
    if output_grad.len() != out_weights.rows() || out_weights.cols() != params.hidden_dim() {
        return Err(Error::dim(
            "gru_sequence_backward output",
            format!("{}x{}", output_grad.len(), params.hidden_dim()),
            format!("{:?}", out_weights.shape()),
        ));
    }
    let g = row(output_grad);
    let d_out = DenseMatrix::from(g.t().dot(h));
    let dh_last = g.dot(out_weights.array());
    let last = tape.len() - 1;
    let mut dh_last = Some(dh_last);
    let grads = params.backward_batch(tape, |t| if t == last { dh_last.take() } else { None })?;
    Ok((grads, d_out))
}
