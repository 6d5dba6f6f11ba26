use std::fs;
use std::path::Path;
use std::process::Command;

use dnt_sync::harness::io::{read_curve, read_trace};
use dnt_sync::harness::{ExperimentConfig, Summary};
use dnt_sync::twin::{sync_error, team_reward};

const BIN: &str = env!("CARGO_BIN_EXE_dntsync");

fn tiny_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        "num_users = 4\nhorizon = 6\nepochs = 3\nq_hidden = 8\nbatch_size = 8\neval_episodes = 2\n\
         pred_trajectories = 10\npred_traj_len = 8\npred_epochs = 2\npred_hidden = 8\naudit_slots = 30\n\
         sweep_epsilons = [0.3]\nsweep_users = [3, 4]\n{extra}"
    );
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn dntsync(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "epsilon = 1.5\n");
    let out = dir.path().join("o");
    let r = dntsync(&["audit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    let cfg = tiny_config(dir.path(), "no_such_key = 1\n");
    let r = dntsync(&["audit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "lr_q = 1e200\nupdates_per_epoch = 3\n");
    let out = dir.path().join("o");
    let r = dntsync(&["train-vdn", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn greedy_evaluation_needs_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let out = dir.path().join("o");
    let r = dntsync(&["evaluate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn train_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = tiny_config(dir.path(), "");
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let train = dir.path().join("train");
    let r = dntsync(&["train-vdn", "--config", cfg_path.to_str().unwrap(), "--seed", "5", "--out", train.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let curve = read_curve(&train.join("curve.csv")).unwrap();
    assert_eq!(curve.len(), 3);
    let trace = read_trace(&train.join("trace.csv")).unwrap();
    assert_eq!(trace.len(), 18);
    // Each epoch's mean reward is the mean of its slots in the trace.
    for (e, row) in curve.iter().enumerate() {
        let slots = &trace[e * 6..(e + 1) * 6];
        let mean = slots.iter().map(|s| s.reward).sum::<f64>() / 6.0;
        assert_eq!(mean, row.mean_reward);
    }

    let eval = dir.path().join("eval");
    let ck = train.join("checkpoints");
    let r = dntsync(&[
        "evaluate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--checkpoints",
        ck.to_str().unwrap(),
        "--out",
        eval.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary: Summary = serde_json::from_str(&fs::read_to_string(eval.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.policy, "greedy");
    assert_eq!(summary.slots, 12);
    assert_eq!(summary.violating_slots, 0);

    // The trace certifies itself: reward, error and total rate recompute exactly.
    let trace = read_trace(&eval.join("trace.csv")).unwrap();
    let mut sum = 0.0;
    for row in &trace {
        assert_eq!(team_reward(&row.phys, &row.twin, &row.rates, &row.assoc_counts, cfg.reward()).unwrap(), row.reward);
        assert_eq!(sync_error(&row.phys, &row.twin).unwrap(), row.sync_error);
        assert_eq!(row.rates.iter().sum::<f64>() + 0.0, row.total_rate + 0.0);
        assert!(row.violations.is_empty());
        sum += row.reward;
    }
    assert_eq!(sum / trace.len() as f64, summary.mean_reward);
}

#[test]
fn scripted_policies_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "coverage_radius = 200.0\n");
    for (policy, exact) in [("all-sync", true), ("no-sync", false), ("random", false)] {
        let out = dir.path().join(policy);
        let r = dntsync(&["evaluate", "--config", cfg.to_str().unwrap(), "--policy", policy, "--out", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let s: Summary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(s.policy, policy);
        if exact {
            assert_eq!(s.mean_sync_error, 0.0);
        }
    }
}

#[test]
fn predictor_pipeline_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "mobility = \"drifting\"\n");
    let data = dir.path().join("data");
    let r = dntsync(&["gen-data", "--config", cfg.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(r.status.success());
    let csv = data.join("trajectories.csv");
    let pred = dir.path().join("pred");
    let r = dntsync(&[
        "train-predictor",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        csv.to_str().unwrap(),
        "--out",
        pred.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["predictor.json", "predictor_curve.csv", "predictor_summary.json"] {
        assert!(pred.join(f).exists(), "{f}");
    }
    // The same data generated in memory gives the same model.
    let pred2 = dir.path().join("pred2");
    let r = dntsync(&["train-predictor", "--config", cfg.to_str().unwrap(), "--out", pred2.to_str().unwrap()]);
    assert!(r.status.success());
    assert_eq!(fs::read(pred.join("predictor.json")).unwrap(), fs::read(pred2.join("predictor.json")).unwrap());

    // A trained predictor drives the twin during evaluation.
    let eval = dir.path().join("eval");
    let model = pred.join("predictor.json");
    let r = dntsync(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--policy",
        "no-sync",
        "--predictor",
        model.to_str().unwrap(),
        "--out",
        eval.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn sweep_and_audit_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let out = dir.path().join("sweep");
    let r = dntsync(&["sweep", "--config", cfg.to_str().unwrap(), "--axis", "users", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "axis,value,method,mean_rate,mean_sync_error,mean_reward");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("users,3,vdn,"));
    assert!(lines[2].starts_with("users,3,iql,"));

    let out = dir.path().join("audit");
    let r = dntsync(&["audit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(report["slots"], 30);
    assert_eq!(report["violating_slots"], 0);
}

#[test]
fn preset_and_sequential_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let r = dntsync(&["gen-data", "--preset", "u10", "--out", out.to_str().unwrap()]);
    assert!(r.status.success());
    let header = fs::read_to_string(out.join("trajectories.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.ends_with("u9x,u9y"));

    let cfg = tiny_config(dir.path(), "");
    let (a, b) = (dir.path().join("p"), dir.path().join("s"));
    for (o, extra) in [(&a, None), (&b, Some("--sequential"))] {
        let mut args = vec!["evaluate", "--config", cfg.to_str().unwrap(), "--policy", "random", "--out", o.to_str().unwrap()];
        args.extend(extra);
        assert!(dntsync(&args).status.success());
    }
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
}
