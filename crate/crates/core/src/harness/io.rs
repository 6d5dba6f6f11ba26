//! Output files. Reals are written in Rust's shortest round-trip decimal form.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::episode::SlotRecord;
use super::eval::SweepRow;
use super::train::CurveRow;
use crate::error::{Error, Result};
use crate::marl::QNet;
use crate::mobility::Point;
use crate::nncore;

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Column names of `trace.csv` for `num_bs` BSs and `num_users` users.
pub fn trace_header(num_bs: usize, num_users: usize) -> Vec<String> {
    let mut h: Vec<String> = ["episode", "slot", "total_rate", "sync_error", "reward"].map(String::from).to_vec();
    for m in 0..num_bs {
        for c in ["action", "assoc", "sync_req", "sync_ok", "uplink_rb", "delay", "local_reward"] {
            h.push(format!("bs{m}_{c}"));
        }
    }
    for u in 0..num_users {
        for c in ["x", "y", "twin_x", "twin_y", "src", "rate", "xi", "bs", "rb"] {
            h.push(format!("u{u}_{c}"));
        }
    }
    h.push("violations".into());
    h
}

pub fn write_trace(path: &Path, slots: &[SlotRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(first) = slots.first() {
        w.write_record(trace_header(first.actions.len(), first.phys.len()))?;
    }
    for s in slots {
        let mut rec = vec![
            s.episode.to_string(),
            s.slot.to_string(),
            s.total_rate.to_string(),
            s.sync_error.to_string(),
            s.reward.to_string(),
        ];
        for m in 0..s.actions.len() {
            rec.push(s.actions[m].index().to_string());
            rec.push(s.actions[m].assoc_string(s.phys.len()));
            rec.push(flag(s.sync_requested[m]));
            rec.push(flag(s.sync_success[m]));
            rec.push(opt(s.uplink_rb[m]));
            rec.push(s.delays[m].to_string());
            rec.push(s.local_rewards[m].to_string());
        }
        for u in 0..s.phys.len() {
            rec.push(s.phys[u].x.to_string());
            rec.push(s.phys[u].y.to_string());
            rec.push(s.twin.positions[u].x.to_string());
            rec.push(s.twin.positions[u].y.to_string());
            rec.push(s.twin.provenance[u].code().to_string());
            rec.push(s.rates[u].to_string());
            rec.push(s.assoc_counts[u].to_string());
            rec.push(opt(s.serving[u].map(|(b, _)| b)));
            rec.push(opt(s.serving[u].map(|(_, n)| n)));
        }
        rec.push(s.violations.join("|"));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The parts of a trace row needed to recompute its reward, error and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: u64,
    pub slot: usize,
    pub total_rate: f64,
    pub sync_error: f64,
    pub reward: f64,
    pub phys: Vec<Point>,
    pub twin: Vec<Point>,
    pub rates: Vec<f64>,
    pub assoc_counts: Vec<u32>,
    pub violations: String,
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("{}: missing column {name}", path.display())))
    };
    let num_users = header.iter().filter(|h| h.ends_with("_twin_x")).count();
    let bad = |e: String| Error::InvalidArgument(format!("{}: {e}", path.display()));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |name: &str| -> Result<f64> { rec[col(name)?].parse::<f64>().map_err(|e| bad(format!("{name}: {e}"))) };
        let point = |a: &str, b: &str| -> Result<Point> { Ok(Point::new(num(a)?, num(b)?)) };
        rows.push(TraceRow {
            episode: num("episode")? as u64,
            slot: num("slot")? as usize,
            total_rate: num("total_rate")?,
            sync_error: num("sync_error")?,
            reward: num("reward")?,
            phys: (0..num_users).map(|u| point(&format!("u{u}_x"), &format!("u{u}_y"))).collect::<Result<_>>()?,
            twin: (0..num_users)
                .map(|u| point(&format!("u{u}_twin_x"), &format!("u{u}_twin_y")))
                .collect::<Result<_>>()?,
            rates: (0..num_users).map(|u| num(&format!("u{u}_rate"))).collect::<Result<_>>()?,
            assoc_counts: (0..num_users)
                .map(|u| Ok(num(&format!("u{u}_xi"))? as u32))
                .collect::<Result<_>>()?,
            violations: rec[col("violations")?].to_string(),
        });
    }
    Ok(rows)
}

pub fn write_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss", "mean_reward", "eps"])?;
    for r in rows {
        w.write_record([r.epoch.to_string(), r.loss.to_string(), r.mean_reward.to_string(), r.eps.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
        };
        out.push(CurveRow {
            epoch: f(0)? as usize,
            loss: f(1)?,
            mean_reward: f(2)?,
            eps: f(3)?,
        });
    }
    Ok(out)
}

/// `epoch,loss` for the predictor.
pub fn write_loss_curve(path: &Path, losses: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss"])?;
    for (e, l) in losses.iter().enumerate() {
        w.write_record([e.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["axis", "value", "method", "mean_rate", "mean_sync_error", "mean_reward"])?;
    for r in rows {
        let axis = serde_json::to_value(r.axis)?;
        w.write_record([
            axis.as_str().unwrap_or_default().to_string(),
            r.value.to_string(),
            r.method.name().to_string(),
            r.mean_rate.to_string(),
            r.mean_sync_error.to_string(),
            r.mean_reward.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One `agent_<m>.json` per network.
pub fn save_nets(dir: &Path, nets: &[QNet]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (m, net) in nets.iter().enumerate() {
        nncore::save_json(net, &dir.join(format!("agent_{m}.json")))?;
    }
    Ok(())
}

pub fn load_nets(dir: &Path, num_bs: usize) -> Result<Vec<QNet>> {
    (0..num_bs)
        .map(|m| {
            let net: QNet = nncore::load_json(&dir.join(format!("agent_{m}.json")))?;
            net.validate()?;
            Ok(net)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::harness::episode::{run_episode, Environment, EpisodeKind, Policy, TwinPredictor};
    use crate::rng::Streams;
    use crate::twin::team_reward;

    #[test]
    fn trace_round_trips_exactly() {
        let cfg = ExperimentConfig {
            num_users: 5,
            horizon: 6,
            ..ExperimentConfig::default()
        };
        let env = Environment::new(&cfg).unwrap();
        let out = run_episode(&env, Policy::Random, &TwinPredictor::Persistence, &Streams::new(9), EpisodeKind::Eval, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        write_trace(&p, &out.slots).unwrap();
        let rows = read_trace(&p).unwrap();
        assert_eq!(rows.len(), 6);
        for (r, s) in rows.iter().zip(&out.slots) {
            assert_eq!(r.phys, s.phys);
            assert_eq!(r.twin, s.twin.positions);
            assert_eq!(r.rates, s.rates);
            assert_eq!(r.reward, s.reward);
            assert_eq!(team_reward(&r.phys, &r.twin, &r.rates, &r.assoc_counts, env.reward).unwrap(), r.reward);
        }
        assert_eq!(trace_header(3, 5).len(), 5 + 3 * 7 + 5 * 9 + 1);
    }

    #[test]
    fn curve_round_trips() {
        let rows = vec![
            CurveRow {
                epoch: 0,
                loss: 0.1 + 0.2,
                mean_reward: -1.0 / 3.0,
                eps: 0.9,
            },
            CurveRow {
                epoch: 1,
                loss: 1e-300,
                mean_reward: 12345.678,
                eps: 0.05,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        write_curve(&p, &rows).unwrap();
        assert_eq!(read_curve(&p).unwrap(), rows);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("epoch,loss,mean_reward,eps\n0,0.30000000000000004,"));
    }

    #[test]
    fn nets_round_trip() {
        let mut rng = Streams::new(1).stream(crate::rng::Lane::Init, 0);
        let nets: Vec<QNet> = (0..2).map(|_| QNet::uniform(3, 2, 4, &mut rng)).collect();
        let dir = tempfile::tempdir().unwrap();
        save_nets(dir.path(), &nets).unwrap();
        assert_eq!(load_nets(dir.path(), 2).unwrap(), nets);
        assert!(load_nets(dir.path(), 3).is_err());
    }
}
