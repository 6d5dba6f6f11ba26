use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::episode::{mean, run_episode, Environment, EpisodeKind, Policy, SlotRecord, TwinPredictor};
use super::train::train_marl;
use crate::error::{Error, Result};
use crate::marl::{Method, QNet};
use crate::rng::Streams;

/// Policy used for evaluation rollouts.
#[derive(Debug, Clone)]
pub enum EvalPolicy {
    Greedy(Vec<QNet>),
    Random,
    AllSync,
    NoSync,
}

impl EvalPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            EvalPolicy::Greedy(_) => "greedy",
            EvalPolicy::Random => "random",
            EvalPolicy::AllSync => "all-sync",
            EvalPolicy::NoSync => "no-sync",
        }
    }

    fn as_policy(&self) -> Policy<'_> {
        match self {
            EvalPolicy::Greedy(nets) => Policy::Learned { nets, explore: 0.0 },
            EvalPolicy::Random => Policy::Random,
            EvalPolicy::AllSync => Policy::AllSync,
            EvalPolicy::NoSync => Policy::NoSync,
        }
    }
}

/// Aggregates written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: String,
    pub episodes: usize,
    pub slots: usize,
    pub mean_reward: f64,
    pub mean_sync_error: f64,
    pub mean_total_rate: f64,
    /// Entry `k` counts slots in which exactly `k` BSs synced.
    pub sync_histogram: Vec<usize>,
    pub sync_failures: usize,
    pub violating_slots: usize,
}

impl Summary {
    pub fn from_slots(policy: &str, episodes: usize, num_bs: usize, slots: &[SlotRecord]) -> Self {
        let mut sync_histogram = vec![0; num_bs + 1];
        for s in slots {
            sync_histogram[s.num_synced()] += 1;
        }
        Self {
            policy: policy.to_string(),
            episodes,
            slots: slots.len(),
            mean_reward: mean(slots.iter().map(|s| s.reward)),
            mean_sync_error: mean(slots.iter().map(|s| s.sync_error)),
            mean_total_rate: mean(slots.iter().map(|s| s.total_rate)),
            sync_histogram,
            sync_failures: slots.iter().map(SlotRecord::sync_failures).sum(),
            violating_slots: slots.iter().filter(|s| !s.violations.is_empty()).count(),
        }
    }
}

/// `cfg.eval_episodes` rollouts without exploration on the evaluation lanes.
/// Episodes run in parallel; the trace keeps episode order.
pub fn evaluate(
    cfg: &ExperimentConfig,
    policy: &EvalPolicy,
    predictor: &TwinPredictor,
    streams: &Streams,
) -> Result<(Summary, Vec<SlotRecord>)> {
    let env = Environment::new(cfg)?;
    if let EvalPolicy::Greedy(nets) = policy {
        for net in nets {
            net.validate()?;
            if net.input_dim() != cfg.input_dim() || net.num_actions() != cfg.num_actions() {
                return Err(Error::Config(format!(
                    "checkpoint expects {} inputs and {} actions, config gives {} and {}",
                    net.input_dim(),
                    net.num_actions(),
                    cfg.input_dim(),
                    cfg.num_actions()
                )));
            }
        }
    }
    let outs = cfg.exec().map_range(cfg.eval_episodes, |e| {
        run_episode(&env, policy.as_policy(), predictor, streams, EpisodeKind::Eval, e as u64)
    });
    let mut trace = Vec::new();
    for out in outs {
        trace.extend(out?.slots);
    }
    Ok((Summary::from_slots(policy.name(), cfg.eval_episodes, env.num_bs(), &trace), trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Epsilon,
    Users,
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub method: Method,
    pub mean_rate: f64,
    pub mean_sync_error: f64,
    pub mean_reward: f64,
}

/// Trains both methods at every grid point with the same seed, then evaluates
/// them greedily. A GRU predictor whose user count does not match a point
/// falls back to persistence there.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, predictor: &TwinPredictor, streams: &Streams) -> Result<Vec<SweepRow>> {
    let values: Vec<f64> = match axis {
        SweepAxis::Epsilon => cfg.sweep_epsilons.clone(),
        SweepAxis::Users => cfg.sweep_users.iter().map(|&u| u as f64).collect(),
    };
    let mut rows = Vec::new();
    for value in values {
        let point = match axis {
            SweepAxis::Epsilon => ExperimentConfig { epsilon: value, ..cfg.clone() },
            SweepAxis::Users => ExperimentConfig {
                num_users: value as usize,
                ..cfg.clone()
            },
        };
        point.validate()?;
        let pred = match predictor {
            TwinPredictor::Gru(m) if m.num_users() != point.num_users => {
                log::warn!("predictor trained for {} users, using persistence at {value}", m.num_users());
                TwinPredictor::Persistence
            }
            p => p.clone(),
        };
        for method in [Method::Vdn, Method::Iql] {
            let trained = train_marl(&point, method, &pred, streams)?;
            let (s, _) = evaluate(&point, &EvalPolicy::Greedy(trained.nets), &pred, streams)?;
            rows.push(SweepRow {
                axis,
                value,
                method,
                mean_rate: s.mean_total_rate,
                mean_sync_error: s.mean_sync_error,
                mean_reward: s.mean_reward,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::ProfileKind;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            num_users: 4,
            horizon: 5,
            epochs: 2,
            q_hidden: 4,
            batch_size: 4,
            eval_episodes: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn summary_means_match_trace() {
        let cfg = tiny();
        let (s, trace) = evaluate(&cfg, &EvalPolicy::Random, &TwinPredictor::Persistence, &Streams::new(4)).unwrap();
        assert_eq!(s.slots, 15);
        assert_eq!(trace.len(), 15);
        let r: f64 = trace.iter().map(|t| t.reward).sum::<f64>() / 15.0;
        assert!((s.mean_reward - r).abs() <= 1e-12 * r.abs().max(1.0));
        assert_eq!(s.sync_histogram.iter().sum::<usize>(), 15);
    }

    #[test]
    fn all_sync_costs_rate_and_removes_error() {
        // One cell, so the uplink costs a user RB without changing interference.
        let cfg = ExperimentConfig {
            num_rbs: 3,
            num_users: 8,
            bs_x: vec![0.0],
            bs_y: vec![0.0],
            coverage_radius: 400.0,
            ..tiny()
        };
        let s = Streams::new(2);
        let (a, _) = evaluate(&cfg, &EvalPolicy::AllSync, &TwinPredictor::Persistence, &s).unwrap();
        let (n, _) = evaluate(&cfg, &EvalPolicy::NoSync, &TwinPredictor::Persistence, &s).unwrap();
        assert_eq!(a.mean_sync_error, 0.0);
        assert!(n.mean_sync_error > 0.0);
        assert!(a.mean_total_rate < n.mean_total_rate, "{a:?} {n:?}");
    }

    #[test]
    fn parallel_and_sequential_evaluation_agree() {
        let cfg = ExperimentConfig {
            mobility: ProfileKind::Drifting,
            ..tiny()
        };
        let seq = ExperimentConfig { parallel: false, ..cfg.clone() };
        let s = Streams::new(8);
        let a = evaluate(&cfg, &EvalPolicy::Random, &TwinPredictor::Persistence, &s).unwrap();
        let b = evaluate(&seq, &EvalPolicy::Random, &TwinPredictor::Persistence, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_shape_checked() {
        let cfg = tiny();
        let nets = vec![QNet::zeros(3, 2, 4); 3];
        assert!(matches!(
            evaluate(&cfg, &EvalPolicy::Greedy(nets), &TwinPredictor::Persistence, &Streams::new(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_point_sweep_matches_evaluate() {
        let cfg = ExperimentConfig {
            sweep_epsilons: vec![0.3],
            ..tiny()
        };
        let s = Streams::new(5);
        let rows = sweep(&cfg, SweepAxis::Epsilon, &TwinPredictor::Persistence, &s).unwrap();
        assert_eq!(rows.len(), 2);
        let point = ExperimentConfig { epsilon: 0.3, ..cfg };
        let t = train_marl(&point, Method::Vdn, &TwinPredictor::Persistence, &s).unwrap();
        let (e, _) = evaluate(&point, &EvalPolicy::Greedy(t.nets), &TwinPredictor::Persistence, &s).unwrap();
        assert_eq!(rows[0].mean_reward, e.mean_reward);
        assert_eq!(rows[0].mean_rate, e.mean_total_rate);
        assert_eq!(rows[0].method, Method::Vdn);
    }
}
