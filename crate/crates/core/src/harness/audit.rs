use serde::Serialize;

use super::config::ExperimentConfig;
use super::episode::{run_episode, Environment, EpisodeKind, Policy, TwinPredictor};
use crate::error::Result;
use crate::marl::ActionCode;
use crate::radio::{Allocation, RadioParams};
use crate::rng::Streams;

/// Identifiers of every violated constraint in one slot.
///
/// `8b`..`8f` are the allocation constraints, `8g` an uplink kept in the
/// allocation with a delay over the cap. `assoc` flags a user served by a BS
/// that did not associate it, `uplink` an uplink held without a sync request.
/// A requested sync that was dropped is an event, not a violation.
pub fn audit_constraints(alloc: &Allocation, actions: &[ActionCode], delays: &[f64], params: &RadioParams) -> Vec<&'static str> {
    let mut out = alloc.violations();
    let mut add = |id: &'static str| {
        if !out.contains(&id) {
            out.push(id);
        }
    };
    for m in 0..alloc.num_bs() {
        if alloc.uplink_rb(m).is_some() {
            if delays.get(m).is_none_or(|d| !(*d <= params.delay_cap)) {
                add("8g");
            }
            if !actions.get(m).is_some_and(|a| a.sync) {
                add("uplink");
            }
        }
        for u in 0..alloc.num_users() {
            if !alloc.user_rbs(m, u).is_empty() && !actions.get(m).is_some_and(|a| a.assoc >> u & 1 == 1) {
                add("assoc");
            }
        }
    }
    out
}

/// Totals of a random-policy audit run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub slots: usize,
    pub violating_slots: usize,
    /// `(id, count)` in first-seen order.
    pub violations: Vec<(String, usize)>,
    pub sync_requests: usize,
    pub sync_failures: usize,
}

/// Runs random-policy evaluation episodes until `cfg.audit_slots` slots have
/// been audited.
pub fn audit_random(cfg: &ExperimentConfig, streams: &Streams) -> Result<AuditReport> {
    let env = Environment::new(cfg)?;
    let episodes = cfg.audit_slots.div_ceil(cfg.horizon);
    let outs = cfg.exec().map_range(episodes, |e| {
        run_episode(&env, Policy::Random, &TwinPredictor::Persistence, streams, EpisodeKind::Eval, e as u64)
    });
    let mut report = AuditReport {
        slots: 0,
        violating_slots: 0,
        violations: Vec::new(),
        sync_requests: 0,
        sync_failures: 0,
    };
    for out in outs {
        for s in out?.slots {
            if report.slots == cfg.audit_slots {
                break;
            }
            report.slots += 1;
            report.sync_requests += s.sync_requested.iter().filter(|r| **r).count();
            report.sync_failures += s.sync_failures();
            if !s.violations.is_empty() {
                report.violating_slots += 1;
            }
            for v in s.violations {
                match report.violations.iter_mut().find(|(id, _)| id == v) {
                    Some((_, c)) => *c += 1,
                    None => report.violations.push((v.to_string(), 1)),
                }
            }
        }
    }
    Ok(report)
}
