//! The work behind each CLI subcommand. Every command writes only into `out`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::audit::audit_random;
use super::config::ExperimentConfig;
use super::episode::TwinPredictor;
use super::eval::{evaluate, sweep, EvalPolicy, SweepAxis};
use super::io;
use super::train::train_marl;
use crate::error::{Error, Result};
use crate::marl::Method;
use crate::mobility::{generate_trajectories, TrajectoryDataset};
use crate::predictor::{self, build_windows, evaluate_mse, MseReport, Persistence, PredictorModel};
use crate::rng::{Lane, Streams};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    GenData,
    TrainPredictor { data: Option<PathBuf> },
    Train { method: Method },
    Evaluate { policy: String, checkpoints: Option<PathBuf> },
    Sweep { axis: SweepAxis },
    Audit,
}

/// Exit status for a failed command: 2 for configuration errors, 3 for
/// divergence, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Divergence(_) => 3,
        _ => 1,
    }
}

/// The twin predictor named by the config, or persistence.
pub fn load_predictor(cfg: &ExperimentConfig) -> Result<TwinPredictor> {
    match &cfg.predictor_checkpoint {
        None => Ok(TwinPredictor::Persistence),
        Some(p) => {
            let m = PredictorModel::load(Path::new(p))?;
            if m.num_users() != cfg.num_users {
                return Err(Error::Config(format!(
                    "predictor checkpoint has {} users, config {}",
                    m.num_users(),
                    cfg.num_users
                )));
            }
            Ok(TwinPredictor::Gru(Box::new(m)))
        }
    }
}

pub fn generate_dataset(cfg: &ExperimentConfig, streams: &Streams) -> Result<TrajectoryDataset> {
    generate_trajectories(
        &cfg.world(),
        &cfg.profiles()?,
        cfg.pred_trajectories,
        cfg.pred_traj_len,
        streams,
        cfg.exec(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorReport {
    pub train_trajectories: usize,
    pub holdout_trajectories: usize,
    pub model: MseReport,
    pub persistence: MseReport,
}

pub struct PredictorRun {
    pub model: PredictorModel,
    pub curve: Vec<f64>,
    pub report: PredictorReport,
}

/// Splits trajectories into train and holdout, trains the GRU predictor and
/// scores both it and persistence on the holdout windows.
pub fn run_predictor(cfg: &ExperimentConfig, data: &TrajectoryDataset, streams: &Streams) -> Result<PredictorRun> {
    cfg.validate()?;
    if data.num_users != cfg.num_users {
        return Err(Error::Config(format!("dataset has {} users, config {}", data.num_users, cfg.num_users)));
    }
    if data.len() < 2 {
        return Err(Error::Config("need at least two trajectories to hold one out".into()));
    }
    let holdout = ((data.len() as f64 * cfg.pred_holdout).round() as usize).clamp(1, data.len() - 1);
    let split = data.len() - holdout;
    let part = |r: std::ops::Range<usize>| TrajectoryDataset {
        num_users: data.num_users,
        trajectories: data.trajectories[r].to_vec(),
    };
    let train_w = build_windows(&part(0..split), cfg.window)?;
    let test_w = build_windows(&part(split..data.len()), cfg.window)?;
    let mut init = streams.stream(Lane::Init, 1 << 20);
    let mut model = PredictorModel::new(cfg.num_users, cfg.pred_hidden, cfg.window, cfg.pred_unit, &mut init)?;
    let mut shuffle = streams.stream(Lane::PredictorShuffle, 0);
    let curve = predictor::train(&mut model, &train_w, &cfg.predictor_train(), &mut shuffle, cfg.exec())?;
    let report = PredictorReport {
        train_trajectories: split,
        holdout_trajectories: holdout,
        model: evaluate_mse(&model, &test_w, cfg.exec())?,
        persistence: evaluate_mse(&Persistence, &test_w, cfg.exec())?,
    };
    Ok(PredictorRun { model, curve, report })
}

fn mkdir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Runs `cmd` and writes its outputs into `out`.
pub fn run(cmd: &Command, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    mkdir(out)?;
    let streams = Streams::new(cfg.seed);
    match cmd {
        Command::GenData => {
            let data = generate_dataset(cfg, &streams)?;
            data.write_csv(&out.join("trajectories.csv"))?;
        }
        Command::TrainPredictor { data } => {
            let data = match data {
                Some(p) => TrajectoryDataset::read_csv(p)?,
                None => generate_dataset(cfg, &streams)?,
            };
            let run = run_predictor(cfg, &data, &streams)?;
            run.model.save(&out.join("predictor.json"))?;
            io::write_loss_curve(&out.join("predictor_curve.csv"), &run.curve)?;
            io::write_json(&out.join("predictor_summary.json"), &run.report)?;
        }
        Command::Train { method } => {
            let predictor = load_predictor(cfg)?;
            let trained = train_marl(cfg, *method, &predictor, &streams)?;
            io::write_curve(&out.join("curve.csv"), &trained.curve)?;
            io::write_trace(&out.join("trace.csv"), &trained.trace)?;
            io::save_nets(&out.join("checkpoints"), &trained.nets)?;
        }
        Command::Evaluate { policy, checkpoints } => {
            let predictor = load_predictor(cfg)?;
            let policy = match policy.as_str() {
                "greedy" => {
                    let dir = checkpoints
                        .as_ref()
                        .ok_or_else(|| Error::Config("greedy evaluation needs --checkpoints".into()))?;
                    EvalPolicy::Greedy(io::load_nets(dir, cfg.num_bs())?)
                }
                "random" => EvalPolicy::Random,
                "all-sync" => EvalPolicy::AllSync,
                "no-sync" => EvalPolicy::NoSync,
                other => return Err(Error::Config(format!("unknown policy `{other}`"))),
            };
            let (summary, trace) = evaluate(cfg, &policy, &predictor, &streams)?;
            io::write_json(&out.join("summary.json"), &summary)?;
            io::write_trace(&out.join("trace.csv"), &trace)?;
        }
        Command::Sweep { axis } => {
            let predictor = load_predictor(cfg)?;
            let rows = sweep(cfg, *axis, &predictor, &streams)?;
            io::write_sweep(&out.join("sweep.csv"), &rows)?;
        }
        Command::Audit => {
            let report = audit_random(cfg, &streams)?;
            io::write_json(&out.join("audit.json"), &report)?;
        }
    }
    Ok(())
}
