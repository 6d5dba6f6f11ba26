//! Resource-block allocation: per-BS Hungarian matching of associated users to
//! free RBs, run sequentially over BSs so each one sees the interference of
//! the BSs already fixed in the slot.

mod hungarian;

pub use hungarian::{hungarian_max_weight, MatchResult};

use crate::error::{Error, Result};
use crate::marl::ActionCode;
use crate::radio::{Allocation, Channel};

/// Result of allocating one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub alloc: Allocation,
    pub sync_requested: Vec<bool>,
    /// Sync requested, uplink RB reserved and final delay within the cap.
    pub sync_success: Vec<bool>,
    /// Uplink RB held in the final allocation.
    pub uplink_rb: Vec<Option<usize>>,
    /// Uplink delay per BS: of the final uplink, of the rejected attempt for a
    /// failed sync, or infinity when no sync was requested.
    pub delays: Vec<f64>,
    /// `(bs, user)` pairs associated but left without an RB.
    pub unserved: Vec<(usize, usize)>,
    /// Sum of matched weights per BS in the last accepted pass.
    pub matched_weight: Vec<f64>,
}

/// Weight matrix for `bs`: rate of each user on each candidate RB given the
/// interference of the allocation fixed so far.
pub fn build_weights(bs: usize, users: &[usize], rbs: &[usize], fixed: &Allocation, channel: &Channel<'_>) -> Vec<Vec<f64>> {
    users
        .iter()
        .map(|&u| rbs.iter().map(|&n| channel.downlink_rate_on(u, bs, n, fixed)).collect())
        .collect()
}

/// RB with the best uplink rate under the current interference, lowest index
/// on ties, with its rate. `None` when `sync` is false.
pub fn select_uplink_rb(bs: usize, sync: bool, fixed: &Allocation, channel: &Channel<'_>) -> Option<(usize, f64)> {
    if !sync {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for n in 0..fixed.num_rbs() {
        if fixed.load(bs, n) > 0 {
            continue;
        }
        let r = channel.uplink_rate_on(bs, n, fixed);
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((n, r));
        }
    }
    best
}

fn check_actions(actions: &[ActionCode], channel: &Channel<'_>) -> Result<()> {
    let m = channel.topology.num_bs();
    if actions.len() != m {
        return Err(Error::dim("allocate_all actions", m, actions.len()));
    }
    let u = channel.positions.len();
    for (bs, a) in actions.iter().enumerate() {
        for user in a.users() {
            if user >= u || !channel.topology.covers(bs, channel.positions[user]) {
                return Err(Error::InvalidArgument(format!("BS {bs} associates uncovered user {user}")));
            }
        }
    }
    Ok(())
}

/// Matches `bs`'s eligible users to its free RBs against `alloc` and writes the
/// result into `alloc`. Returns the matched weight and the unmatched users.
fn match_bs(bs: usize, users: &[usize], alloc: &mut Allocation, channel: &Channel<'_>) -> Result<(f64, Vec<usize>)> {
    let rbs: Vec<usize> = (0..alloc.num_rbs()).filter(|&n| !alloc.y(bs, n)).collect();
    let weights = build_weights(bs, users, &rbs, alloc, channel);
    let result = hungarian_max_weight(&weights)?;
    let mut matched = vec![false; users.len()];
    for &(i, j) in &result.pairs {
        alloc.set_x(bs, users[i], rbs[j], true);
        matched[i] = true;
    }
    let unmatched = users.iter().zip(&matched).filter(|(_, m)| !**m).map(|(u, _)| *u).collect();
    Ok((result.total_weight, unmatched))
}

fn total_downlink_rate(alloc: &Allocation, channel: &Channel<'_>) -> f64 {
    (0..alloc.num_users()).map(|u| channel.user_rate(u, alloc)).sum()
}

/// Allocates one slot for the joint action, BSs in index order.
///
/// Each syncing BS first reserves its best uplink RB; a reservation whose delay
/// already exceeds the cap is dropped and the sync fails. Associated users
/// not already served by an earlier BS are then matched to the remaining RBs.
/// After the pass, uplinks are re-checked under the complete allocation and any
/// whose delay now exceeds the cap are removed and marked failed.
///
/// `rounds > 1` re-solves every BS's matching against all others' current
/// choices; a round is kept only if it does not lower the total downlink rate.
pub fn allocate_all(actions: &[ActionCode], channel: &Channel<'_>, rounds: usize) -> Result<AllocationOutcome> {
    check_actions(actions, channel)?;
    let num_bs = actions.len();
    let num_users = channel.positions.len();
    let mut alloc = Allocation::new(num_bs, num_users, channel.params.num_rbs);
    let cap = channel.params.delay_cap;
    let payload = channel.params.payload;

    let mut sync_success = vec![false; num_bs];
    let mut delays = vec![f64::INFINITY; num_bs];
    let mut served = vec![false; num_users];
    let mut eligible: Vec<Vec<usize>> = vec![Vec::new(); num_bs];
    let mut matched_weight = vec![0.0; num_bs];
    let mut unmatched: Vec<Vec<usize>> = vec![Vec::new(); num_bs];

    for (m, action) in actions.iter().enumerate() {
        if let Some((rb, rate)) = select_uplink_rb(m, action.sync, &alloc, channel) {
            let delay = crate::radio::uplink_delay(payload, rate);
            delays[m] = delay;
            if delay <= cap {
                alloc.set_y(m, rb, true);
                sync_success[m] = true;
            } else {
                log::debug!("BS {m}: uplink delay {delay} exceeds cap {cap}, sync fails");
            }
        }
        eligible[m] = action.users().filter(|&u| !served[u]).collect();
        let (w, left) = match_bs(m, &eligible[m], &mut alloc, channel)?;
        matched_weight[m] = w;
        for u in &eligible[m] {
            if !left.contains(u) {
                served[*u] = true;
            }
        }
        unmatched[m] = left;
    }

    let mut best_total = total_downlink_rate(&alloc, channel);
    for _ in 1..rounds {
        let mut trial = alloc.clone();
        let mut trial_weight = matched_weight.clone();
        let mut trial_unmatched = unmatched.clone();
        for m in 0..num_bs {
            for &u in &eligible[m] {
                for n in 0..trial.num_rbs() {
                    trial.set_x(m, u, n, false);
                }
            }
            let (w, left) = match_bs(m, &eligible[m], &mut trial, channel)?;
            trial_weight[m] = w;
            trial_unmatched[m] = left;
        }
        let total = total_downlink_rate(&trial, channel);
        if total >= best_total {
            let unchanged = trial == alloc;
            best_total = total;
            alloc = trial;
            matched_weight = trial_weight;
            unmatched = trial_unmatched;
            if unchanged {
                break;
            }
        } else {
            break;
        }
    }

    // Interference from later BSs can push an accepted uplink over the cap.
    for m in 0..num_bs {
        if sync_success[m] {
            let delay = channel.uplink_delay(m, &alloc);
            delays[m] = delay;
            if delay > cap {
                log::debug!("BS {m}: final uplink delay {delay} exceeds cap {cap}, sync fails");
                if let Some(rb) = alloc.uplink_rb(m) {
                    alloc.set_y(m, rb, false);
                }
                sync_success[m] = false;
            }
        }
    }
    for m in 0..num_bs {
        if sync_success[m] {
            delays[m] = channel.uplink_delay(m, &alloc);
        }
    }

    let uplink_rb = (0..num_bs).map(|m| alloc.uplink_rb(m)).collect();
    let mut unserved: Vec<(usize, usize)> = Vec::new();
    for (m, action) in actions.iter().enumerate() {
        for u in action.users() {
            if alloc.user_rbs(m, u).is_empty() {
                unserved.push((m, u));
            }
        }
    }
    Ok(AllocationOutcome {
        alloc,
        sync_requested: actions.iter().map(|a| a.sync).collect(),
        sync_success,
        uplink_rb,
        delays,
        unserved,
        matched_weight,
    })
}
