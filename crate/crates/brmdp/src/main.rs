//! Command-line front end: run replicated experiments to CSV, inspect a
//! single replication's solves, cross-check a policy's score between exact
//! recursion and rollout, and drive the risk-adjusted bandit.
//!
//! Logs go to stderr through `env_logger` (`RUST_LOG=info` for progress
//! lines); results go to stdout or the requested files.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use brmdp::bandit::{play_ucb, regret, theorem1_bound, BanditInstance, CostModel};
use brmdp::harness::{
    evaluate_exact, evaluate_rollout, run_experiment, solve_replication, write_outputs,
    ExperimentConfig, RhoKind,
};
use brmdp::risk::RiskFunctional;
use brmdp::rng::{tags, RngStream};
use brmdp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "brmdp",
    version,
    about = "Bayes-risk MDP solvers and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment from a JSON config and write CSVs.
    Experiment(ExperimentArgs),
    /// Solve one replication's dataset and print each formulation's root.
    Solve(SolveArgs),
    /// Score one replication's policies, cross-checking exact against rollout.
    Evaluate(EvaluateArgs),
    /// Play the risk-adjusted bandit and emit a regret curve.
    Bandit(BanditArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSVs; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 meaning one per core. Affects speed, never results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dataset size to draw.
    #[arg(long, default_value_t = 0)]
    h: usize,
    /// Replication index whose dataset to reproduce.
    #[arg(long, default_value_t = 0)]
    replication: usize,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dataset size to draw.
    #[arg(long, default_value_t = 0)]
    h: usize,
    /// Replication index whose dataset to reproduce.
    #[arg(long, default_value_t = 0)]
    replication: usize,
    /// Rollout episodes for the Monte Carlo cross-check.
    #[arg(long, default_value_t = 100_000)]
    episodes: usize,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BanditArgs {
    /// Bandit config (JSON): machines, functional, play checkpoints, seeds.
    #[arg(long)]
    config: PathBuf,
    /// Write the regret curve CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    match Cli::parse().command {
        Command::Experiment(args) => report(experiment(args)),
        Command::Solve(args) => report(solve(args)),
        Command::Evaluate(args) => report(evaluate(args)),
        Command::Bandit(args) => report(bandit(args)),
    }
}

fn report(result: Result<()>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            Error::Config("pass --out or set `out_dir` in the config".into())
        })?;

    let output = run_experiment(&cfg, args.threads)?;
    write_outputs(&out_dir, &output, cfg.histogram_bin_width)?;

    println!("reference optimum: {}", output.v_star);
    println!(
        "{:<20} {:>6} {:>12} {:>10} {:>12} {:>9}",
        "formulation", "h", "average", "std", "d", "failures"
    );
    for s in &output.summary {
        let fmt = |v: Option<f64>, digits: usize| match v {
            Some(x) => format!("{x:.digits$}"),
            None => "-".to_string(),
        };
        println!(
            "{:<20} {:>6} {:>12} {:>10} {:>12} {:>9}",
            s.formulation,
            s.h,
            fmt(s.average, 4),
            fmt(s.std, 4),
            fmt(s.d.map(|d| d * 1e5), 4) + "e-5",
            s.failures
        );
    }
    println!(
        "wrote {}",
        ["replications.csv", "summary.csv", "histogram.csv"]
            .map(|f| out_dir.join(f).display().to_string())
            .join(", ")
    );
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed)?;
    let solved = solve_replication(&cfg, args.h, args.replication)?;
    let env = cfg.environment.build()?;

    let mean = if solved.data.is_empty() {
        f64::NAN
    } else {
        solved.data.iter().sum::<f64>() / solved.data.len() as f64
    };
    println!(
        "dataset: h={} replication={} (sample mean {mean:.4})",
        solved.h, solved.replication
    );
    for run in &solved.runs {
        if let Some(msg) = &run.error {
            println!("{:<20} failed: {msg}", run.label);
            continue;
        }
        let root = run
            .solver_value
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".to_string());
        let first = run.policy.as_ref().and_then(|p| {
            let mu = p.initial_belief()?;
            p.action(0, env.initial_state(), mu)
        });
        let first = first
            .map(|a| a.to_string())
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:<20} root {root}  initial action {first}  ({:.2}s)",
            run.label, run.solve_time_s
        );
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed)?;
    let solved = solve_replication(&cfg, args.h, args.replication)?;
    let env = cfg.environment.build()?;
    let theta_true = cfg.environment.theta_true();
    let master = RngStream::from_seed(cfg.seed);

    println!(
        "scoring at theta = {theta_true} with {} rollout episodes",
        args.episodes
    );
    for (fi, run) in solved.runs.iter().enumerate() {
        let Some(policy) = &run.policy else {
            println!(
                "{:<20} skipped: {}",
                run.label,
                run.error.as_deref().unwrap_or("solve failed")
            );
            continue;
        };
        let stream = master
            .at(tags::EVAL, args.h as u64)
            .at(tags::REPLICATION, args.replication as u64)
            .at(tags::FORMULATION, fi as u64);
        let rolled = evaluate_rollout(&env, policy, theta_true, args.episodes, stream)?;
        match evaluate_exact(&env, policy, theta_true) {
            Ok(exact) => {
                let gap = rolled.value - exact;
                let sigmas = if rolled.std_error > 0.0 {
                    format!("{:.2}", gap.abs() / rolled.std_error)
                } else {
                    "inf".to_string()
                };
                println!(
                    "{:<20} exact {exact:.6}  rollout {:.6} +- {:.6}  ({sigmas} se apart)",
                    run.label, rolled.value, rolled.std_error
                );
            }
            Err(e) => {
                println!(
                    "{:<20} rollout {:.6} +- {:.6}  (exact recursion unavailable: {e})",
                    run.label, rolled.value, rolled.std_error
                );
            }
        }
    }
    Ok(())
}

/// Bandit run description: machine cost models per scenario, the functional
/// to optimize, play-count checkpoints, and how many seeds to average.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BanditConfig {
    machines: Vec<Vec<CostModel>>,
    #[serde(default = "default_rho")]
    rho: RhoKind,
    #[serde(default)]
    alpha: Option<f64>,
    plays: Vec<usize>,
    #[serde(default = "default_seeds")]
    seeds: usize,
    #[serde(default)]
    seed: u64,
}

fn default_rho() -> RhoKind {
    RhoKind::Expectation
}

fn default_seeds() -> usize {
    100
}

fn bandit(args: BanditArgs) -> Result<()> {
    let cfg: BanditConfig = serde_json::from_str(&std::fs::read_to_string(&args.config)?)?;
    if cfg.plays.is_empty() || cfg.seeds == 0 {
        return Err(Error::Config(
            "bandit run needs play checkpoints and at least one seed".into(),
        ));
    }
    let rho = match cfg.rho {
        RhoKind::Expectation => RiskFunctional::expectation(),
        RhoKind::Var => RiskFunctional::var(cfg.alpha.ok_or_else(|| {
            Error::Config("tail-risk functionals need an `alpha` in the config".into())
        })?)?,
        RhoKind::Cvar => RiskFunctional::cvar(cfg.alpha.ok_or_else(|| {
            Error::Config("tail-risk functionals need an `alpha` in the config".into())
        })?)?,
    };
    let instance = BanditInstance::new(cfg.machines.clone(), rho)?;
    let gaps = instance.gaps()?;
    let master = RngStream::from_seed(cfg.seed);

    let mut csv = String::from("plays,mean_regret,se_regret,bound\n");
    for &n in &cfg.plays {
        let mut totals = Vec::with_capacity(cfg.seeds);
        for s in 0..cfg.seeds {
            let (_, ledger) = play_ucb(&instance, n, master.at(tags::BANDIT, s as u64))?;
            totals.push(regret(&ledger)?);
        }
        let k = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / k;
        let se = if totals.len() > 1 {
            (totals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        let _ = writeln!(csv, "{n},{mean},{se},{}", theorem1_bound(&gaps, n as u64));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
