//! Partial observation, twin composition, synchronization error and rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::Point;
use crate::radio::Topology;

/// Users inside one BS's coverage disc, with their true positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservation {
    pub bs: usize,
    pub covered: Vec<usize>,
    pub positions: Vec<Point>,
}

impl LocalObservation {
    pub fn covers(&self, user: usize) -> bool {
        self.covered.binary_search(&user).is_ok()
    }

    /// Coverage as a bit mask over users.
    pub fn mask(&self) -> u64 {
        self.covered.iter().fold(0, |m, &u| m | (1 << u))
    }
}

pub fn observe(bs: usize, phys: &[Point], topology: &Topology) -> LocalObservation {
    let covered: Vec<usize> = (0..phys.len()).filter(|&u| topology.covers(bs, phys[u])).collect();
    let positions = covered.iter().map(|&u| phys[u]).collect();
    LocalObservation { bs, covered, positions }
}

pub fn observe_all(phys: &[Point], topology: &Topology) -> Vec<LocalObservation> {
    (0..topology.num_bs()).map(|m| observe(m, phys, topology)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Received,
    Predicted,
}

impl Provenance {
    pub fn code(self) -> &'static str {
        match self {
            Provenance::Received => "R",
            Provenance::Predicted => "P",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinState {
    pub positions: Vec<Point>,
    pub provenance: Vec<Provenance>,
}

impl TwinState {
    /// A twin that mirrors `phys` exactly.
    pub fn exact(phys: &[Point]) -> Self {
        Self {
            positions: phys.to_vec(),
            provenance: vec![Provenance::Received; phys.len()],
        }
    }
}

/// Users covered by a BS whose sync succeeded take their observed positions;
/// everyone else, including users no BS covers, takes the prediction.
pub fn compose_twin(predictions: &[Point], observations: &[LocalObservation], sync_success: &[bool]) -> Result<TwinState> {
    if observations.len() != sync_success.len() {
        return Err(Error::dim("compose_twin sync flags", observations.len(), sync_success.len()));
    }
    let mut positions = predictions.to_vec();
    let mut provenance = vec![Provenance::Predicted; predictions.len()];
    for (obs, _) in observations.iter().zip(sync_success).filter(|(_, ok)| **ok) {
        for (&u, &p) in obs.covered.iter().zip(&obs.positions) {
            if u >= predictions.len() {
                return Err(Error::dim("compose_twin user index", predictions.len(), u));
            }
            positions[u] = p;
            provenance[u] = Provenance::Received;
        }
    }
    Ok(TwinState { positions, provenance })
}

/// `‖s - s̄‖² / U` over all 2U coordinates.
pub fn sync_error(phys: &[Point], twin: &[Point]) -> Result<f64> {
    if phys.len() != twin.len() {
        return Err(Error::dim("sync_error", phys.len(), twin.len()));
    }
    if phys.is_empty() {
        return Ok(0.0);
    }
    Ok(squared_distance(phys, twin) / phys.len() as f64)
}

fn squared_distance(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.dist_sq(*q)).sum()
}

/// Reward weights: `epsilon` trades rate against sync error, `rho` is the
/// per-association penalty for users claimed by several BSs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub epsilon: f64,
    pub rho: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { epsilon: 0.25, rho: -5.0 }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        if !(self.rho < 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be negative, got {}", self.rho)));
        }
        Ok(())
    }
}

/// Team reward. When every user is associated with exactly one BS:
/// `-(1-ε)/U ‖s - s̄‖² + ε Σ rates`; otherwise `Σ_u 1{ξ_u > 1} ξ_u ρ`,
/// which is zero when no user is over-associated.
pub fn team_reward(phys: &[Point], twin: &[Point], rates: &[f64], assoc_counts: &[u32], reward: RewardParams) -> Result<f64> {
    let u = phys.len();
    if rates.len() != u || assoc_counts.len() != u {
        return Err(Error::dim("team_reward", u, rates.len().min(assoc_counts.len())));
    }
    if assoc_counts.iter().all(|&x| x == 1) {
        let err = sync_error(phys, twin)?;
        Ok(-(1.0 - reward.epsilon) * err + reward.epsilon * rates.iter().sum::<f64>())
    } else {
        Ok(over_association_penalty(assoc_counts.iter().copied(), reward.rho))
    }
}

fn over_association_penalty(counts: impl Iterator<Item = u32>, rho: f64) -> f64 {
    counts.filter(|&x| x > 1).map(|x| f64::from(x) * rho).fold(0.0, |a, b| a + b)
}

/// Local reward of one BS. When every user it covers is associated exactly
/// once: `ε Σ (rates of users it serves) - (1-ε)/U ‖s^m - s̄^m‖²`; otherwise
/// the penalty over the over-associated users this BS claimed.
pub fn local_reward(
    obs: &LocalObservation,
    assoc_mask: u64,
    phys: &[Point],
    twin: &[Point],
    own_rates: &[f64],
    assoc_counts: &[u32],
    reward: RewardParams,
) -> Result<f64> {
    let u = phys.len();
    if twin.len() != u || own_rates.len() != u || assoc_counts.len() != u {
        return Err(Error::dim("local_reward", u, twin.len()));
    }
    if obs.covered.iter().all(|&i| assoc_counts[i] == 1) {
        let err: f64 = obs.covered.iter().map(|&i| phys[i].dist_sq(twin[i])).sum();
        let rate: f64 = (0..u).filter(|&i| assoc_mask >> i & 1 == 1).map(|i| own_rates[i]).sum();
        Ok(reward.epsilon * rate - (1.0 - reward.epsilon) / u as f64 * err)
    } else {
        let claimed = (0..u).filter(|&i| assoc_mask >> i & 1 == 1).map(|i| assoc_counts[i]);
        Ok(over_association_penalty(claimed, reward.rho))
    }
}
