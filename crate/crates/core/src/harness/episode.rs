use rand::Rng;

use super::audit::audit_constraints;
use super::config::ExperimentConfig;
use crate::allocator::allocate_all;
use crate::error::{Error, Result};
use crate::marl::{act_epsilon_greedy, encode_local_state, valid_actions, ActionCode, EpisodeRecord, QNet, POSITION_SCALE};
use crate::mobility::{MobilityProfile, Point, World};
use crate::predictor::{Persistence, PredictorModel, StatePredictor};
use crate::radio::{Channel, FadingDraw, RadioParams, Topology};
use crate::rng::{Lane, Streams};
use crate::twin::{compose_twin, local_reward, observe_all, sync_error, team_reward, LocalObservation, RewardParams, TwinState};

/// What the cloud uses to fill in users no successful sync reported.
#[derive(Debug, Clone, PartialEq)]
pub enum TwinPredictor {
    Persistence,
    Gru(Box<PredictorModel>),
}

impl StatePredictor for TwinPredictor {
    fn predict(&self, history: &[Vec<Point>]) -> Result<Vec<Point>> {
        match self {
            TwinPredictor::Persistence => Persistence.predict(history),
            TwinPredictor::Gru(m) => m.predict(history),
        }
    }
}

impl TwinPredictor {
    fn history_len(&self) -> usize {
        match self {
            TwinPredictor::Persistence => 1,
            TwinPredictor::Gru(m) => m.window,
        }
    }
}

/// How each BS picks its action.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Epsilon-greedy on the agents' Q-networks (`explore = 0` is greedy).
    Learned { nets: &'a [QNet], explore: f64 },
    /// Uniform over valid actions.
    Random,
    /// Every BS syncs and serves the users it is first to cover.
    AllSync,
    /// As [`Policy::AllSync`] without syncing.
    NoSync,
}

/// Which pair of environment lanes an episode draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeKind {
    Train,
    Eval,
}

/// Everything about one slot needed to audit it and recompute its reward.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub episode: u64,
    pub slot: usize,
    pub actions: Vec<ActionCode>,
    pub sync_requested: Vec<bool>,
    pub sync_success: Vec<bool>,
    pub delays: Vec<f64>,
    pub uplink_rb: Vec<Option<usize>>,
    /// `(bs, rb)` serving each user.
    pub serving: Vec<Option<(usize, usize)>>,
    pub assoc_counts: Vec<u32>,
    pub phys: Vec<Point>,
    pub twin: TwinState,
    pub rates: Vec<f64>,
    pub total_rate: f64,
    pub sync_error: f64,
    pub reward: f64,
    pub local_rewards: Vec<f64>,
    pub violations: Vec<&'static str>,
}

impl SlotRecord {
    pub fn num_synced(&self) -> usize {
        self.sync_success.iter().filter(|s| **s).count()
    }

    /// Requested syncs that did not make it into the allocation.
    pub fn sync_failures(&self) -> usize {
        self.sync_requested.iter().zip(&self.sync_success).filter(|(r, s)| **r && !**s).count()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub slots: Vec<SlotRecord>,
    pub record: EpisodeRecord,
}

impl EpisodeOutput {
    pub fn mean_reward(&self) -> f64 {
        mean(self.slots.iter().map(|s| s.reward))
    }
}

pub(crate) fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// The static part of an episode: geometry, radio and reward parameters.
#[derive(Debug, Clone)]
pub struct Environment {
    pub topology: Topology,
    pub radio: RadioParams,
    pub reward: RewardParams,
    pub world: World,
    pub profiles: Vec<MobilityProfile>,
    pub num_users: usize,
    pub horizon: usize,
    pub alloc_rounds: usize,
}

impl Environment {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            topology: cfg.topology(),
            radio: cfg.radio(),
            reward: cfg.reward(),
            world: cfg.world(),
            profiles: cfg.profiles()?,
            num_users: cfg.num_users,
            horizon: cfg.horizon,
            alloc_rounds: cfg.alloc_rounds,
        })
    }

    pub fn num_bs(&self) -> usize {
        self.topology.num_bs()
    }
}

/// Each covered user goes to the lowest-index BS covering it, up to the BS's
/// free RBs.
fn scripted_actions(obs: &[LocalObservation], num_users: usize, num_rbs: usize, sync: bool) -> Vec<ActionCode> {
    let mut taken = vec![false; num_users];
    obs.iter()
        .map(|o| {
            let room = num_rbs - usize::from(sync && num_rbs > 0);
            let mut assoc = 0u64;
            let mut n = 0;
            for &u in &o.covered {
                if !taken[u] && n < room {
                    taken[u] = true;
                    assoc |= 1 << u;
                    n += 1;
                }
            }
            ActionCode::new(sync && num_rbs > 0, assoc)
        })
        .collect()
}

struct Agents<'a> {
    nets: &'a [QNet],
    hidden: Vec<Vec<f64>>,
}

/// Runs one episode of `env.horizon` slots.
///
/// The twin starts synchronized with the users' positions one slot before the
/// first decision. Each slot: predict from the last twin states, let every BS
/// observe and act, allocate RBs, compose the twin, score the slot.
pub fn run_episode(
    env: &Environment,
    policy: Policy<'_>,
    predictor: &TwinPredictor,
    streams: &Streams,
    kind: EpisodeKind,
    index: u64,
) -> Result<EpisodeOutput> {
    let (mob_lane, fade_lane) = match kind {
        EpisodeKind::Train => (Lane::Mobility, Lane::Fading),
        EpisodeKind::Eval => (Lane::EvalMobility, Lane::EvalFading),
    };
    let explore_index = match kind {
        EpisodeKind::Train => index,
        EpisodeKind::Eval => index | 1 << 39,
    };
    let mut mob_rng = streams.stream(mob_lane, index);
    let mut fade_rng = streams.stream(fade_lane, index);
    let mut act_rng = streams.stream(Lane::Exploration, explore_index);

    let u = env.num_users;
    let m = env.num_bs();
    let n = env.radio.num_rbs;
    let mut agents = match policy {
        Policy::Learned { nets, .. } => {
            if nets.len() != m {
                return Err(Error::dim("agent networks", m, nets.len()));
            }
            Some(Agents {
                nets,
                hidden: nets.iter().map(QNet::initial_hidden).collect(),
            })
        }
        _ => None,
    };

    let before = env.world.initial_positions(u, &mut mob_rng);
    let mut phys = env.world.step_all(&before, &env.profiles, &mut mob_rng);
    let mut history = vec![before];
    let keep = predictor.history_len();

    let mut slots = Vec::with_capacity(env.horizon);
    let mut record = EpisodeRecord::new(n);
    for t in 0..env.horizon {
        if t > 0 {
            phys = env.world.step_all(&phys, &env.profiles, &mut mob_rng);
        }
        let predicted = predictor.predict(&history)?;
        let obs = observe_all(&phys, &env.topology);
        let masks: Vec<u64> = obs.iter().map(LocalObservation::mask).collect();
        let states: Vec<Vec<f64>> = obs.iter().map(|o| encode_local_state(o, u, POSITION_SCALE)).collect();

        let actions: Vec<ActionCode> = match (policy, agents.as_mut()) {
            (Policy::Learned { explore, .. }, Some(a)) => (0..m)
                .map(|bs| {
                    a.nets[bs].step(&mut a.hidden[bs], &states[bs])?;
                    let valid = valid_actions(masks[bs], n);
                    let q = a.nets[bs].q_for(&a.hidden[bs], &valid);
                    Ok(ActionCode::from_index(act_epsilon_greedy(&q, &valid, explore, &mut act_rng)?))
                })
                .collect::<Result<_>>()?,
            (Policy::Random, _) => masks
                .iter()
                .map(|&mask| {
                    let valid = valid_actions(mask, n);
                    ActionCode::from_index(valid[act_rng.random_range(0..valid.len())])
                })
                .collect(),
            (Policy::AllSync, _) => scripted_actions(&obs, u, n, true),
            (Policy::NoSync, _) => scripted_actions(&obs, u, n, false),
            (Policy::Learned { .. }, None) => unreachable!("agents built for learned policy"),
        };

        let fading = FadingDraw::draw(u, m, &mut fade_rng);
        let channel = Channel::new(&env.topology, &env.radio, &fading, &phys)?;
        let outcome = allocate_all(&actions, &channel, env.alloc_rounds)?;
        let twin = compose_twin(&predicted, &obs, &outcome.sync_success)?;

        let rates: Vec<f64> = (0..u).map(|i| channel.user_rate(i, &outcome.alloc)).collect();
        let serving: Vec<Option<(usize, usize)>> = (0..u).map(|i| outcome.alloc.serving(i)).collect();
        let mut assoc_counts = vec![0u32; u];
        for a in &actions {
            for i in a.users() {
                assoc_counts[i] += 1;
            }
        }
        let reward = team_reward(&phys, &twin.positions, &rates, &assoc_counts, env.reward)?;
        let local_rewards: Vec<f64> = (0..m)
            .map(|bs| {
                let own: Vec<f64> = (0..u)
                    .map(|i| if serving[i].map(|(b, _)| b) == Some(bs) { rates[i] } else { 0.0 })
                    .collect();
                local_reward(&obs[bs], actions[bs].assoc, &phys, &twin.positions, &own, &assoc_counts, env.reward)
            })
            .collect::<Result<_>>()?;
        let violations = audit_constraints(&outcome.alloc, &actions, &outcome.delays, &env.radio);
        if !violations.is_empty() {
            log::warn!("episode {index} slot {t}: constraint violations {violations:?}");
        }

        record.push_slot(
            states,
            actions.iter().map(|a| a.index()).collect(),
            masks,
            reward,
            local_rewards.clone(),
            phys.iter().flat_map(|p| [p.x, p.y]).collect(),
        )?;

        history.push(twin.positions.clone());
        if history.len() > keep {
            history.remove(0);
        }

        slots.push(SlotRecord {
            episode: index,
            slot: t,
            sync_requested: actions.iter().map(|a| a.sync).collect(),
            actions,
            sync_success: outcome.sync_success,
            delays: outcome.delays,
            uplink_rb: outcome.uplink_rb,
            serving,
            assoc_counts,
            sync_error: sync_error(&phys, &twin.positions)?,
            phys: phys.clone(),
            twin,
            total_rate: rates.iter().sum(),
            rates,
            reward,
            local_rewards,
            violations,
        });
    }
    Ok(EpisodeOutput { slots, record })
}
