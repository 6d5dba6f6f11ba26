use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dnt_sync::harness::{exit_code, run, Command, ExperimentConfig, SweepAxis};
use dnt_sync::marl::Method;
use dnt_sync::Error;

#[derive(Parser)]
#[command(name = "dntsync", version, about = "Digital network twin synchronization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in parameter set used when no config file is given.
    #[arg(long, value_parser = ["u12", "u10"], conflicts_with = "config")]
    preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Predictor checkpoint for the twin; persistence when absent.
    #[arg(long)]
    predictor: Option<PathBuf>,
    /// Force the sequential code path.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Greedy,
    Random,
    AllSync,
    NoSync,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Epsilon,
    Users,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic trajectory dataset.
    GenData(Common),
    /// Train the GRU state predictor and score it against persistence.
    TrainPredictor {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV from gen-data; generated in memory when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train VDN agents.
    TrainVdn(Common),
    /// Train IQL agents.
    TrainIql(Common),
    /// Roll out a policy and summarize.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "greedy")]
        policy: Policy,
        /// Directory with agent_<m>.json files.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Train and evaluate both methods over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
    },
    /// Audit random-policy slots against the allocation constraints.
    Audit(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &common.predictor {
        cfg.predictor_checkpoint = Some(p.display().to_string());
    }
    if common.sequential {
        cfg.parallel = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, cmd) = match cli.command {
        Cmd::GenData(c) => (c, Command::GenData),
        Cmd::TrainPredictor { common, data } => (common, Command::TrainPredictor { data }),
        Cmd::TrainVdn(c) => (c, Command::Train { method: Method::Vdn }),
        Cmd::TrainIql(c) => (c, Command::Train { method: Method::Iql }),
        Cmd::Evaluate {
            common,
            policy,
            checkpoints,
        } => {
            let policy = match policy {
                Policy::Greedy => "greedy",
                Policy::Random => "random",
                Policy::AllSync => "all-sync",
                Policy::NoSync => "no-sync",
            };
            (
                common,
                Command::Evaluate {
                    policy: policy.into(),
                    checkpoints,
                },
            )
        }
        Cmd::Sweep { common, axis } => {
            let axis = match axis {
                Axis::Epsilon => SweepAxis::Epsilon,
                Axis::Users => SweepAxis::Users,
            };
            (common, Command::Sweep { axis })
        }
        Cmd::Audit(c) => (c, Command::Audit),
    };
    let result = load(&common).and_then(|cfg| run(&cmd, &cfg, &common.out));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
