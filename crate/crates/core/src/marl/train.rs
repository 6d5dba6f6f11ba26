use std::collections::BTreeMap;

use ndarray::Array2;

use super::action::valid_actions;
use super::net::{QNet, QNetGrads};
use super::replay::ReplayMemory;
use crate::error::{Error, Result};
use crate::nncore::dot;
use crate::par::Execution;

/// How the shared TD error is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Team reward against the sum of per-agent Q values.
    Vdn,
    /// Each agent's local reward against its own Q value.
    Iql,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Vdn => "vdn",
            Method::Iql => "iql",
        }
    }
}

/// Sum of the chosen-action local Q values.
pub fn q_tot(per_agent: &[f64]) -> f64 {
    per_agent.iter().sum()
}

/// Maximum of `Σ_m q_m[a_m]` over all joint actions, by enumeration.
pub fn max_joint_sum(tables: &[Vec<f64>]) -> f64 {
    fn rec(tables: &[Vec<f64>], acc: f64) -> f64 {
        match tables.split_first() {
            None => acc,
            Some((first, rest)) => first.iter().map(|q| rec(rest, acc + q)).fold(f64::NEG_INFINITY, f64::max),
        }
    }
    rec(tables, 0.0)
}

/// `Σ_m max_a q_m[a]`.
pub fn sum_of_maxes(tables: &[Vec<f64>]) -> f64 {
    tables.iter().fold(0.0, |acc, t| acc + t.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Linear decay from `start` to `end` over the first `fraction` of `epochs`,
/// then constant.
pub fn exploration_rate(epoch: usize, epochs: usize, start: f64, end: f64, fraction: f64) -> f64 {
    let horizon = (epochs as f64 * fraction).max(1.0);
    let progress = (epoch as f64 / horizon).min(1.0);
    start + (end - start) * progress
}

/// Hard-copies online parameters into the target networks.
pub fn sync_targets(nets: &[QNet], targets: &mut [QNet]) {
    for (t, n) in targets.iter_mut().zip(nets) {
        t.copy_from(n);
    }
}

/// Whether the target networks are refreshed after `epoch` (0-based).
pub fn is_sync_epoch(epoch: usize, period: usize) -> bool {
    period > 0 && (epoch + 1).is_multiple_of(period)
}

/// Loss, TD errors and per-agent gradients for one sampled batch.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub loss: f64,
    /// VDN: one error per sample. IQL: `[agent][sample]` flattened agent-major.
    pub td_errors: Vec<f64>,
    pub grads: Vec<QNetGrads>,
}

struct AgentPass {
    /// Online Q of the taken action per sample.
    q: Vec<f64>,
    /// Target max over valid next actions per sample (0 at terminal slots).
    next_max: Vec<f64>,
    tape: crate::nncore::GruTape,
}

/// Episodes touched by the batch, each mapped to a batch row.
fn episode_rows(samples: &[(usize, usize)]) -> BTreeMap<usize, usize> {
    let mut rows = BTreeMap::new();
    for &(e, _) in samples {
        let next = rows.len();
        rows.entry(e).or_insert(next);
    }
    rows
}

fn stacked_inputs(memory: &ReplayMemory, rows: &BTreeMap<usize, usize>, agent: usize, steps: usize, dim: usize) -> Vec<Array2<f64>> {
    (0..steps)
        .map(|t| {
            let mut x = Array2::zeros((rows.len(), dim));
            for (&e, &r) in rows {
                let ep = memory.episode(e);
                if t < ep.len() {
                    for (k, v) in ep.local_states[t][agent].iter().enumerate() {
                        x[(r, k)] = *v;
                    }
                }
            }
            x
        })
        .collect()
}

fn agent_pass(
    agent: usize,
    net: &QNet,
    target: &QNet,
    memory: &ReplayMemory,
    samples: &[(usize, usize)],
    rows: &BTreeMap<usize, usize>,
) -> Result<AgentPass> {
    let dim = net.input_dim();
    let online_steps = samples.iter().map(|s| s.1 + 1).max().unwrap_or(0);
    let target_steps = samples
        .iter()
        .filter(|(e, t)| !memory.episode(*e).is_terminal(*t))
        .map(|s| s.1 + 2)
        .max()
        .unwrap_or(0);
    let inputs = stacked_inputs(memory, rows, agent, online_steps.max(target_steps), dim);
    for x in &inputs {
        if x.ncols() != dim {
            return Err(Error::dim("replayed local state", dim, x.ncols()));
        }
    }
    let tape = net.unroll(&inputs[..online_steps])?;
    let q = samples
        .iter()
        .map(|&(e, t)| {
            let a = memory.episode(e).actions[t][agent];
            dot(net.head.row(a), tape.hidden(t).row(rows[&e]).as_slice().expect("contiguous"))
        })
        .collect();

    let next_max = if target_steps > 0 {
        let ttape = target.unroll(&inputs[..target_steps])?;
        samples
            .iter()
            .map(|&(e, t)| {
                let ep = memory.episode(e);
                if ep.is_terminal(t) {
                    return 0.0;
                }
                let h = ttape.hidden(t + 1).row(rows[&e]).to_vec();
                let valid = valid_actions(ep.masks[t + 1][agent], ep.num_rbs);
                target.q_for(&h, &valid).into_iter().fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    } else {
        vec![0.0; samples.len()]
    };
    Ok(AgentPass { q, next_max, tape })
}

fn agent_grads(
    agent: usize,
    net: &QNet,
    pass: &AgentPass,
    memory: &ReplayMemory,
    samples: &[(usize, usize)],
    rows: &BTreeMap<usize, usize>,
    dq: &[f64],
) -> Result<QNetGrads> {
    let hidden = net.hidden_dim();
    let mut grads = net.zeros_like();
    let mut inject: BTreeMap<usize, Array2<f64>> = BTreeMap::new();
    for (i, &(e, t)) in samples.iter().enumerate() {
        let a = memory.episode(e).actions[t][agent];
        let r = rows[&e];
        let h = pass.tape.hidden(t).row(r);
        for (g, hv) in grads.head.row_mut(a).iter_mut().zip(h.iter()) {
            *g += dq[i] * hv;
        }
        let dh = inject.entry(t).or_insert_with(|| Array2::zeros((rows.len(), hidden)));
        for (k, w) in net.head.row(a).iter().enumerate() {
            dh[(r, k)] += dq[i] * w;
        }
    }
    grads.gru = net.gru.backward_batch(&pass.tape, |t| inject.remove(&t))?;
    Ok(grads)
}

/// Computes the batch loss and every agent's gradient without updating.
///
/// VDN: `ỹ = r + γ Σ_m max_a Q̃_m(s'_m, a)`, loss `mean (ỹ - Σ_m Q_m)²`, and
/// agent `m` receives `-2 (ỹ - Q_tot) / B · ∇Q_m`.
/// IQL: each agent's own `(r_m + γ max Q̃_m - Q_m)²`; the reported loss is the
/// mean over agents.
pub fn compute_batch(
    method: Method,
    nets: &[QNet],
    targets: &[QNet],
    memory: &ReplayMemory,
    samples: &[(usize, usize)],
    gamma: f64,
    exec: Execution,
) -> Result<BatchResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    if nets.len() != targets.len() {
        return Err(Error::dim("target networks", nets.len(), targets.len()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0,1), got {gamma}")));
    }
    let agents = nets.len();
    if let Some(&(e, _)) = samples.iter().find(|(e, _)| memory.episode(*e).num_agents() != agents) {
        return Err(Error::dim("replayed agents", agents, memory.episode(e).num_agents()));
    }
    let rows = episode_rows(samples);
    let passes: Vec<AgentPass> = exec
        .map_range(agents, |m| agent_pass(m, &nets[m], &targets[m], memory, samples, &rows))
        .into_iter()
        .collect::<Result<_>>()?;

    let b = samples.len() as f64;
    let (loss, td_errors, dqs): (f64, Vec<f64>, Vec<Vec<f64>>) = match method {
        Method::Vdn => {
            let errs: Vec<f64> = samples
                .iter()
                .enumerate()
                .map(|(i, &(e, t))| {
                    let r = memory.episode(e).team_rewards[t];
                    let next: f64 = passes.iter().map(|p| p.next_max[i]).sum();
                    let q: Vec<f64> = passes.iter().map(|p| p.q[i]).collect();
                    r + gamma * next - q_tot(&q)
                })
                .collect();
            let loss = errs.iter().map(|e| e * e).sum::<f64>() / b;
            let dq: Vec<f64> = errs.iter().map(|e| -2.0 * e / b).collect();
            (loss, errs, vec![dq; agents])
        }
        Method::Iql => {
            let mut all = Vec::with_capacity(agents * samples.len());
            let mut dqs = Vec::with_capacity(agents);
            let mut loss = 0.0;
            for (m, p) in passes.iter().enumerate() {
                let errs: Vec<f64> = samples
                    .iter()
                    .enumerate()
                    .map(|(i, &(e, t))| memory.episode(e).local_rewards[t][m] + gamma * p.next_max[i] - p.q[i])
                    .collect();
                loss += errs.iter().map(|e| e * e).sum::<f64>() / b;
                dqs.push(errs.iter().map(|e| -2.0 * e / b).collect());
                all.extend(errs);
            }
            (loss / agents as f64, all, dqs)
        }
    };
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("non-finite {} loss", method.name())));
    }
    let grads: Vec<QNetGrads> = exec
        .map_range(agents, |m| agent_grads(m, &nets[m], &passes[m], memory, samples, &rows, &dqs[m]))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(BatchResult { loss, td_errors, grads })
}

/// One SGD update of every agent on a sampled batch. Returns the batch loss.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    method: Method,
    nets: &mut [QNet],
    targets: &[QNet],
    memory: &ReplayMemory,
    samples: &[(usize, usize)],
    gamma: f64,
    lr: f64,
    exec: Execution,
) -> Result<f64> {
    let res = compute_batch(method, nets, targets, memory, samples, gamma, exec)?;
    for (net, g) in nets.iter_mut().zip(&res.grads) {
        if !g.is_finite() {
            return Err(Error::Divergence(format!("non-finite {} gradient", method.name())));
        }
        net.apply_sgd(g, lr)?;
    }
    Ok(res.loss)
}

pub fn vdn_train_step(
    nets: &mut [QNet],
    targets: &[QNet],
    memory: &ReplayMemory,
    samples: &[(usize, usize)],
    gamma: f64,
    lr: f64,
    exec: Execution,
) -> Result<f64> {
    train_step(Method::Vdn, nets, targets, memory, samples, gamma, lr, exec)
}

pub fn iql_train_step(
    nets: &mut [QNet],
    targets: &[QNet],
    memory: &ReplayMemory,
    samples: &[(usize, usize)],
    gamma: f64,
    lr: f64,
    exec: Execution,
) -> Result<f64> {
    train_step(Method::Iql, nets, targets, memory, samples, gamma, lr, exec)
}
