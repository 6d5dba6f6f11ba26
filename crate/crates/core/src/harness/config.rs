use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marl::{num_actions, validate_user_count};
use crate::mobility::{build_profiles, Arena, MobilityProfile, Point, ProfileKind, World};
use crate::par::Execution;
use crate::predictor::TrainConfig;
use crate::radio::{PathlossMode, RadioParams, Topology};
use crate::twin::RewardParams;

/// Flat experiment configuration. Missing keys take their defaults; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// U
    pub num_users: usize,
    /// N
    pub num_rbs: usize,
    /// ε
    pub epsilon: f64,
    /// ρ
    pub rho: f64,
    /// T, slots per episode
    pub horizon: usize,
    /// G
    pub epochs: usize,
    /// γ
    pub gamma: f64,
    /// λ_Q
    pub lr_q: f64,
    /// λ_G
    pub lr_g: f64,
    /// θ^h
    pub q_hidden: usize,
    /// N_h
    pub pred_hidden: usize,
    /// K
    pub window: usize,
    /// |D_g|
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// C, epochs between target syncs
    pub target_period: usize,
    pub episodes_per_epoch: usize,
    pub updates_per_epoch: usize,
    pub explore_start: f64,
    pub explore_end: f64,
    pub explore_fraction: f64,
    pub alloc_rounds: usize,
    /// B
    pub bandwidth: f64,
    /// P
    pub power: f64,
    /// N_0
    pub noise: f64,
    /// D_m
    pub payload: f64,
    /// α
    pub delay_cap: f64,
    pub pathloss: PathlossMode,
    pub bs_x: Vec<f64>,
    pub bs_y: Vec<f64>,
    pub cloud_x: f64,
    pub cloud_y: f64,
    pub coverage_radius: f64,
    pub arena_x_min: f64,
    pub arena_x_max: f64,
    pub arena_y_min: f64,
    pub arena_y_max: f64,
    pub mobility: ProfileKind,
    /// Δl
    pub step: f64,
    pub pred_trajectories: usize,
    pub pred_traj_len: usize,
    pub pred_epochs: usize,
    pub pred_batch: usize,
    pub pred_holdout: f64,
    pub pred_unit: f64,
    pub predictor_checkpoint: Option<String>,
    pub eval_episodes: usize,
    pub audit_slots: usize,
    pub sweep_epsilons: Vec<f64>,
    pub sweep_users: Vec<usize>,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let topo = Topology::default();
        let radio = RadioParams::default();
        let arena = Arena::default();
        let reward = RewardParams::default();
        Self {
            seed: 0,
            num_users: 12,
            num_rbs: radio.num_rbs,
            epsilon: reward.epsilon,
            rho: reward.rho,
            horizon: 30,
            epochs: 75,
            gamma: 0.2,
            lr_q: crate::nncore::DEFAULT_Q_LR,
            lr_g: crate::nncore::DEFAULT_PREDICTOR_LR,
            q_hidden: 128,
            pred_hidden: 128,
            window: 5,
            batch_size: 64,
            replay_capacity: 10_000,
            target_period: 10,
            episodes_per_epoch: 1,
            updates_per_epoch: 1,
            explore_start: 0.9,
            explore_end: 0.05,
            explore_fraction: 0.6,
            alloc_rounds: 1,
            bandwidth: radio.bandwidth,
            power: radio.power,
            noise: radio.noise,
            payload: radio.payload,
            delay_cap: radio.delay_cap,
            pathloss: radio.pathloss,
            bs_x: topo.bs_positions.iter().map(|p| p.x).collect(),
            bs_y: topo.bs_positions.iter().map(|p| p.y).collect(),
            cloud_x: topo.cloud_position.x,
            cloud_y: topo.cloud_position.y,
            coverage_radius: topo.coverage_radius,
            arena_x_min: arena.x_min,
            arena_x_max: arena.x_max,
            arena_y_min: arena.y_min,
            arena_y_max: arena.y_max,
            mobility: ProfileKind::Uniform,
            step: 1.0,
            pred_trajectories: 2000,
            pred_traj_len: 30,
            pred_epochs: 10,
            pred_batch: 32,
            pred_holdout: 0.2,
            pred_unit: 1.0,
            predictor_checkpoint: None,
            eval_episodes: 20,
            audit_slots: 10_000,
            sweep_epsilons: vec![0.25, 0.3, 0.8],
            sweep_users: vec![6, 9, 12],
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    /// The defaults: twelve users.
    pub fn twelve_users() -> Self {
        Self::default()
    }

    /// Ten users.
    pub fn ten_users() -> Self {
        Self {
            num_users: 10,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "u12" => Ok(Self::twelve_users()),
            "u10" => Ok(Self::ten_users()),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        validate_user_count(self.num_users).map_err(|e| Error::Config(e.to_string()))?;
        for (name, v) in [
            ("num_rbs", self.num_rbs),
            ("horizon", self.horizon),
            ("epochs", self.epochs),
            ("q_hidden", self.q_hidden),
            ("pred_hidden", self.pred_hidden),
            ("window", self.window),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("target_period", self.target_period),
            ("episodes_per_epoch", self.episodes_per_epoch),
            ("alloc_rounds", self.alloc_rounds),
            ("pred_trajectories", self.pred_trajectories),
            ("pred_epochs", self.pred_epochs),
            ("pred_batch", self.pred_batch),
            ("eval_episodes", self.eval_episodes),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.pred_traj_len < self.window + 1 {
            return bad(format!("pred_traj_len {} shorter than window + 1", self.pred_traj_len));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0,1), got {}", self.gamma));
        }
        for (name, v) in [("lr_q", self.lr_q), ("lr_g", self.lr_g), ("pred_unit", self.pred_unit)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("explore_start", self.explore_start), ("explore_end", self.explore_end)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        if !(self.explore_fraction > 0.0 && self.explore_fraction <= 1.0) {
            return bad(format!("explore_fraction must lie in (0,1], got {}", self.explore_fraction));
        }
        if !(self.pred_holdout > 0.0 && self.pred_holdout < 1.0) {
            return bad(format!("pred_holdout must lie in (0,1), got {}", self.pred_holdout));
        }
        if self.bs_x.len() != self.bs_y.len() {
            return bad(format!("bs_x has {} entries, bs_y {}", self.bs_x.len(), self.bs_y.len()));
        }
        if !(self.arena_x_min < self.arena_x_max && self.arena_y_min < self.arena_y_max) {
            return bad("empty arena".into());
        }
        if self.sweep_users.iter().any(|&u| validate_user_count(u).is_err()) {
            return bad(format!("sweep_users out of range: {:?}", self.sweep_users));
        }
        if self.sweep_epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad(format!("sweep_epsilons must lie in (0,1): {:?}", self.sweep_epsilons));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        self.topology().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.radio().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.reward().validate()?;
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        Topology {
            bs_positions: self.bs_x.iter().zip(&self.bs_y).map(|(&x, &y)| Point::new(x, y)).collect(),
            cloud_position: Point::new(self.cloud_x, self.cloud_y),
            coverage_radius: self.coverage_radius,
        }
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            bandwidth: self.bandwidth,
            power: self.power,
            noise: self.noise,
            payload: self.payload,
            delay_cap: self.delay_cap,
            num_rbs: self.num_rbs,
            pathloss: self.pathloss,
        }
    }

    pub fn reward(&self) -> RewardParams {
        RewardParams {
            epsilon: self.epsilon,
            rho: self.rho,
        }
    }

    pub fn arena(&self) -> Arena {
        Arena {
            x_min: self.arena_x_min,
            x_max: self.arena_x_max,
            y_min: self.arena_y_min,
            y_max: self.arena_y_max,
        }
    }

    /// Users start uniformly inside the union of coverage discs.
    pub fn world(&self) -> World {
        let topo = self.topology();
        World {
            arena: self.arena(),
            centers: topo.bs_positions,
            radius: topo.coverage_radius,
        }
    }

    pub fn profiles(&self) -> Result<Vec<MobilityProfile>> {
        build_profiles(self.mobility, self.num_users, self.step)
    }

    pub fn num_bs(&self) -> usize {
        self.bs_x.len()
    }

    pub fn num_actions(&self) -> usize {
        num_actions(self.num_users)
    }

    /// Encoded local state length: positions and coverage mask.
    pub fn input_dim(&self) -> usize {
        3 * self.num_users
    }

    pub fn exec(&self) -> Execution {
        if self.parallel {
            Execution::default()
        } else {
            Execution::Sequential
        }
    }

    pub fn predictor_train(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr_g,
            batch_size: self.pred_batch,
            epochs: self.pred_epochs,
            ..TrainConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.num_bs(), 3);
        assert_eq!(c.num_actions(), 1 << 13);
    }

    #[test]
    fn presets() {
        assert_eq!(ExperimentConfig::preset("u10").unwrap().num_users, 10);
        assert_eq!(ExperimentConfig::preset("u12").unwrap().num_users, 12);
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = ExperimentConfig::from_toml("num_users = 6\nepsilon = 0.8\nmobility = \"drifting\"\n").unwrap();
        assert_eq!(c.num_users, 6);
        assert_eq!(c.epsilon, 0.8);
        assert_eq!(c.mobility, ProfileKind::Drifting);
        assert_eq!(c.num_rbs, 12);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "epsilon = 1.0",
            "epsilon = 0.0",
            "num_users = 15",
            "num_users = 0",
            "gamma = 1.0",
            "horizon = 0",
            "rho = 1.0",
            "bs_x = [0.0]",
            "pred_traj_len = 5",
            "unknown_key = 1",
            "num_users = \"twelve\"",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }
}
