//! Episode loop, training runs, evaluation, sweeps, constraint audit,
//! configuration and output files.

pub mod audit;
pub mod commands;
pub mod config;
pub mod episode;
pub mod eval;
pub mod io;
pub mod train;

pub use audit::{audit_constraints, audit_random, AuditReport};
pub use commands::{exit_code, run, Command};
pub use config::ExperimentConfig;
pub use episode::{run_episode, Environment, EpisodeKind, EpisodeOutput, Policy, SlotRecord, TwinPredictor};
pub use eval::{evaluate, sweep, EvalPolicy, Summary, SweepAxis, SweepRow};
pub use train::{init_nets, ls_slope, train_marl, CurveRow, TrainOutput};
