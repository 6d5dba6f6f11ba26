use serde::Serialize;

use super::config::ExperimentConfig;
use super::episode::{run_episode, Environment, EpisodeKind, Policy, SlotRecord, TwinPredictor};
use crate::error::{Error, Result};
use crate::marl::{exploration_rate, is_sync_epoch, sync_targets, train_step, Method, QNet, ReplayMemory};
use crate::rng::{Lane, Streams};

/// One row of `curve.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub loss: f64,
    pub mean_reward: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub method: Method,
    pub nets: Vec<QNet>,
    pub curve: Vec<CurveRow>,
    /// Every slot collected during training, in order.
    pub trace: Vec<SlotRecord>,
}

/// Fresh agent networks; agent `m` draws from its own init stream.
pub fn init_nets(cfg: &ExperimentConfig, streams: &Streams) -> Vec<QNet> {
    (0..cfg.num_bs())
        .map(|m| {
            let mut rng = streams.stream(Lane::Init, m as u64);
            QNet::uniform(cfg.input_dim(), cfg.q_hidden, cfg.num_actions(), &mut rng)
        })
        .collect()
}

/// Collect-then-train for `cfg.epochs` epochs.
///
/// Each epoch collects `episodes_per_epoch` fresh episodes with the current
/// exploration rate, stores them, then runs `updates_per_epoch` mini-batch
/// updates. Target networks are refreshed every `target_period` epochs.
/// Environment randomness depends only on the epoch and episode number, so
/// VDN and IQL runs with the same seed see the same users and fading.
pub fn train_marl(cfg: &ExperimentConfig, method: Method, predictor: &TwinPredictor, streams: &Streams) -> Result<TrainOutput> {
    let env = Environment::new(cfg)?;
    let exec = cfg.exec();
    let mut nets = init_nets(cfg, streams);
    let mut targets = nets.clone();
    let mut memory = ReplayMemory::new(cfg.replay_capacity);
    let mut sample_rng = streams.stream(Lane::ReplaySampling, 0);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut trace = Vec::new();

    for epoch in 0..cfg.epochs {
        let eps = exploration_rate(epoch, cfg.epochs, cfg.explore_start, cfg.explore_end, cfg.explore_fraction);
        let mut rewards = Vec::new();
        for e in 0..cfg.episodes_per_epoch {
            let index = (epoch * cfg.episodes_per_epoch + e) as u64;
            let out = run_episode(
                &env,
                Policy::Learned { nets: &nets, explore: eps },
                predictor,
                streams,
                EpisodeKind::Train,
                index,
            )?;
            rewards.extend(out.slots.iter().map(|s| s.reward));
            trace.extend(out.slots);
            memory.push(out.record);
        }
        let mut loss = 0.0;
        for _ in 0..cfg.updates_per_epoch {
            let samples = memory.sample(cfg.batch_size, &mut sample_rng);
            loss += train_step(method, &mut nets, &targets, &memory, &samples, cfg.gamma, cfg.lr_q, exec)?;
        }
        if cfg.updates_per_epoch > 0 {
            loss /= cfg.updates_per_epoch as f64;
        }
        if !nets.iter().all(QNet::is_finite) {
            return Err(Error::Divergence(format!("{} parameters non-finite after epoch {epoch}", method.name())));
        }
        if is_sync_epoch(epoch, cfg.target_period) {
            sync_targets(&nets, &mut targets);
        }
        let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
        log::info!("{} epoch {epoch}: loss {loss} mean reward {mean_reward} eps {eps}", method.name());
        curve.push(CurveRow {
            epoch,
            loss,
            mean_reward,
            eps,
        });
    }
    Ok(TrainOutput { method, nets, curve, trace })
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}
