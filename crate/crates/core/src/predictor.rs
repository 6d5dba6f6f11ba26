//! Cloud-side GRU predictor of the next physical state from the last `K`
//! twin states.
//!
//! Each window is expressed relative to its most recent state: the GRU sees
//! `(s_k - s_K) / unit` and its output is read as the displacement to the next
//! slot, so `ŝ_{K+1} = s_K + unit · W^o h_K`. With `W^o = 0` the model is the
//! persistence predictor.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::{Point, TrajectoryDataset};
use crate::nncore::{self, DenseMatrix, GruCellParams};
use crate::par::Execution;

/// Epoch losses above this abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Anything that maps a state history to a next-state estimate.
pub trait StatePredictor {
    /// `history` is oldest first and non-empty.
    fn predict(&self, history: &[Vec<Point>]) -> Result<Vec<Point>>;
}

/// Predicts the last seen state.
#[derive(Debug, Clone, Copy, Default)]
pub struct Persistence;

impl StatePredictor for Persistence {
    fn predict(&self, history: &[Vec<Point>]) -> Result<Vec<Point>> {
        history
            .last()
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("empty history".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub gru: GruCellParams,
    /// `2U × hidden`
    pub out: DenseMatrix,
    pub window: usize,
    /// Meters per normalized unit.
    pub unit: f64,
}

impl PredictorModel {
    /// GRU weights uniform, output map zero.
    pub fn new<R: Rng + ?Sized>(num_users: usize, hidden: usize, window: usize, unit: f64, rng: &mut R) -> Result<Self> {
        if num_users == 0 || hidden == 0 || window == 0 {
            return Err(Error::InvalidArgument("predictor dimensions must be positive".into()));
        }
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(Error::InvalidArgument(format!("unit must be positive, got {unit}")));
        }
        Ok(Self {
            gru: GruCellParams::uniform(2 * num_users, hidden, rng),
            out: DenseMatrix::zeros(2 * num_users, hidden),
            window,
            unit,
        })
    }

    pub fn zeros(num_users: usize, hidden: usize, window: usize) -> Self {
        Self {
            gru: GruCellParams::zeros(2 * num_users, hidden),
            out: DenseMatrix::zeros(2 * num_users, hidden),
            window,
            unit: 1.0,
        }
    }

    pub fn num_users(&self) -> usize {
        self.out.rows() / 2
    }

    pub fn validate(&self) -> Result<()> {
        self.gru.validate()?;
        if self.out.cols() != self.gru.hidden_dim() || self.out.rows() != self.gru.input_dim() {
            return Err(Error::dim(
                "predictor output map",
                format!("{}x{}", self.gru.input_dim(), self.gru.hidden_dim()),
                format!("{:?}", self.out.shape()),
            ));
        }
        if self.window == 0 || !(self.unit > 0.0) {
            return Err(Error::InvalidArgument("predictor window and unit must be positive".into()));
        }
        Ok(())
    }

    /// The last `window` states, left-padded with the earliest one.
    fn window_of<'a>(&self, history: &'a [Vec<Point>]) -> Result<Vec<&'a Vec<Point>>> {
        let first = history.first().ok_or_else(|| Error::InvalidArgument("empty history".into()))?;
        let start = history.len().saturating_sub(self.window);
        let mut w: Vec<&Vec<Point>> = vec![first; self.window.saturating_sub(history.len())];
        w.extend(&history[start..]);
        for s in &w {
            if s.len() != self.num_users() {
                return Err(Error::dim("predictor history state", self.num_users(), s.len()));
            }
        }
        Ok(w)
    }

    /// Normalized GRU inputs for a window.
    fn encode(&self, window: &[&Vec<Point>]) -> Vec<Vec<f64>> {
        let last = window.last().expect("non-empty window");
        window
            .iter()
            .map(|s| {
                s.iter()
                    .zip(last.iter())
                    .flat_map(|(p, q)| [(p.x - q.x) / self.unit, (p.y - q.y) / self.unit])
                    .collect()
            })
            .collect()
    }

    /// Raw network output `W^o h_K` (normalized displacement) for a history.
    pub fn raw_output(&self, history: &[Vec<Point>]) -> Result<Vec<f64>> {
        let w = self.window_of(history)?;
        let inputs = self.encode(&w);
        Ok(nncore::gru_sequence_forward(&self.gru, &self.out, &inputs)?.0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        nncore::save_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = nncore::load_json(path)?;
        m.validate()?;
        Ok(m)
    }
}

impl StatePredictor for PredictorModel {
    fn predict(&self, history: &[Vec<Point>]) -> Result<Vec<Point>> {
        let out = self.raw_output(history)?;
        let last = history.last().expect("checked non-empty");
        Ok(last
            .iter()
            .enumerate()
            .map(|(u, p)| Point::new(p.x + self.unit * out[2 * u], p.y + self.unit * out[2 * u + 1]))
            .collect())
    }
}

/// `K` consecutive states of one trajectory and the state that follows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub inputs: Vec<Vec<Point>>,
    pub target: Vec<Point>,
}

/// Every window of length `window` (plus target) from every trajectory.
pub fn build_windows(dataset: &TrajectoryDataset, window: usize) -> Result<Vec<WindowSample>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let mut out = Vec::new();
    for (i, traj) in dataset.trajectories.iter().enumerate() {
        if traj.len() < window + 1 {
            return Err(Error::InvalidArgument(format!(
                "trajectory {i} has {} slots, need at least {}",
                traj.len(),
                window + 1
            )));
        }
        for start in 0..traj.len() - window {
            out.push(WindowSample {
                inputs: traj[start..start + window].to_vec(),
                target: traj[start + window].clone(),
            });
        }
    }
    Ok(out)
}

fn flatten(s: &[Point]) -> Vec<f64> {
    s.iter().flat_map(|p| [p.x, p.y]).collect()
}

/// `‖pred - truth‖² / (2U)` over flattened coordinates.
pub fn loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::dim("predictor loss", pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / pred.len() as f64)
}

/// Position loss between two states.
pub fn state_loss(pred: &[Point], truth: &[Point]) -> Result<f64> {
    loss(&flatten(pred), &flatten(truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Rows per independently computed gradient chunk.
    pub chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: nncore::DEFAULT_PREDICTOR_LR,
            batch_size: 32,
            epochs: 50,
            chunk: 8,
        }
    }
}

struct ChunkGrad {
    loss_sum: f64,
    gru: GruCellParams,
    out: DenseMatrix,
}

/// Summed loss and gradients over `rows` of `samples`, with output gradient
/// scaled by `scale`.
fn chunk_gradient(model: &PredictorModel, samples: &[WindowSample], rows: &[usize], scale: f64) -> Result<ChunkGrad> {
    let dim = 2 * model.num_users();
    let k = model.window;
    let n = rows.len();
    let mut inputs = vec![Array2::<f64>::zeros((n, dim)); k];
    let mut target = Array2::<f64>::zeros((n, dim));
    for (r, &i) in rows.iter().enumerate() {
        let s = &samples[i];
        let w = model.window_of(&s.inputs)?;
        for (t, x) in model.encode(&w).into_iter().enumerate() {
            for (c, v) in x.into_iter().enumerate() {
                inputs[t][(r, c)] = v;
            }
        }
        let last = w.last().expect("window");
        if s.target.len() != model.num_users() {
            return Err(Error::dim("predictor target", model.num_users(), s.target.len()));
        }
        for (u, (p, q)) in s.target.iter().zip(last.iter()).enumerate() {
            target[(r, 2 * u)] = (p.x - q.x) / model.unit;
            target[(r, 2 * u + 1)] = (p.y - q.y) / model.unit;
        }
    }
    let tape = model.gru.forward_batch(&inputs, None)?;
    let h = tape.final_hidden().expect("non-empty");
    let pred = h.dot(&model.out.view().t());
    let diff = &pred - &target;
    let loss_sum = diff.iter().map(|d| d * d).sum::<f64>() / dim as f64;
    // d/dpred of ‖pred - y‖²/(2U) is (pred - y)/U.
    let dout = diff.mapv(|d| d * 2.0 / dim as f64 * scale);
    let out = DenseMatrix::from(dout.t().dot(h));
    let dh = dout.dot(model.out.array());
    let last = tape.len() - 1;
    let mut dh = Some(dh);
    let gru = model.gru.backward_batch(&tape, |t| if t == last { dh.take() } else { None })?;
    Ok(ChunkGrad { loss_sum, gru, out })
}

/// Mean loss over `rows` and the averaged gradient.
fn batch_gradient(
    model: &PredictorModel,
    samples: &[WindowSample],
    rows: &[usize],
    chunk: usize,
    exec: Execution,
) -> Result<(f64, GruCellParams, DenseMatrix)> {
    let scale = 1.0 / rows.len() as f64;
    let chunks: Vec<&[usize]> = rows.chunks(chunk.max(1)).collect();
    let parts = exec.map_slice(&chunks, |c| chunk_gradient(model, samples, c, scale));
    let mut gru = model.gru.zeros_like();
    let mut out = DenseMatrix::zeros(model.out.rows(), model.out.cols());
    let mut loss_sum = 0.0;
    for p in parts {
        let p = p?;
        loss_sum += p.loss_sum;
        gru.add_scaled(1.0, &p.gru)?;
        out.add_scaled(1.0, &p.out)?;
    }
    Ok((loss_sum * scale, gru, out))
}

/// Mini-batch SGD. Each epoch reshuffles the samples with `rng`; the returned
/// curve holds each epoch's mean pre-update batch loss (normalized units).
pub fn train<R: Rng + ?Sized>(
    model: &mut PredictorModel,
    samples: &[WindowSample],
    cfg: &TrainConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty predictor dataset".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    model.validate()?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (l, g, o) = batch_gradient(model, samples, batch, cfg.chunk, exec)?;
            total += l * batch.len() as f64;
            if !l.is_finite() || !g.is_finite() || !o.is_finite() {
                return Err(Error::Divergence(format!("non-finite predictor loss in epoch {epoch}")));
            }
            model.gru.apply_sgd(&g, cfg.lr)?;
            model.out.apply_sgd(&o, cfg.lr)?;
        }
        let mean = total / samples.len() as f64;
        log::info!("predictor epoch {epoch}: loss {mean}");
        if !(mean <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence(format!("predictor epoch {epoch} loss {mean}")));
        }
        curve.push(mean);
    }
    Ok(curve)
}

/// Mean loss of the current model over `samples` (normalized units).
pub fn mean_loss(model: &PredictorModel, samples: &[WindowSample], exec: Execution) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let rows: Vec<usize> = (0..samples.len()).collect();
    Ok(batch_gradient(model, samples, &rows, 64, exec)?.0)
}

/// Mean squared position error per user and averaged over users, in meters².
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseReport {
    pub per_user: Vec<f64>,
    pub aggregate: f64,
}

pub fn evaluate_mse<P: StatePredictor + Sync>(predictor: &P, heldout: &[WindowSample], exec: Execution) -> Result<MseReport> {
    let first = heldout
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty holdout set".into()))?;
    let users = first.target.len();
    let errs = exec.map_slice(heldout, |s| -> Result<Vec<f64>> {
        let pred = predictor.predict(&s.inputs)?;
        if pred.len() != users || s.target.len() != users {
            return Err(Error::dim("evaluate_mse state", users, pred.len()));
        }
        Ok(pred.iter().zip(&s.target).map(|(p, q)| p.dist_sq(*q)).collect())
    });
    let mut per_user = vec![0.0; users];
    for e in errs {
        for (acc, v) in per_user.iter_mut().zip(e?) {
            *acc += v;
        }
    }
    let n = heldout.len() as f64;
    per_user.iter_mut().for_each(|v| *v /= n);
    let aggregate = per_user.iter().sum::<f64>() / users as f64;
    Ok(MseReport { per_user, aggregate })
}
