use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kql::agent::EvalPolicy;
use kql::envs::{EnvKind, FiniteMdp, RewardMap};
use kql::harness::{
    exit_code, mean_std, run_checks, run_experiment, run_regret, run_seeds, summarize, BetaMode, CheckOptions,
    KernelChoice, LambdaMode, RegretConfig, RunConfig,
};
use kql::{Exec, KqlError, Result};

#[derive(Parser)]
#[command(name = "kql", version, about = "Kernelized optimistic Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a control task and evaluate the learned policy.
    Train(TrainArgs),
    /// Measure discounted regret on a finite MDP.
    Regret(RegretArgs),
    /// Run the dimension check suite on random instances.
    Checks(ChecksArgs),
    /// Train over a grid of tasks, kernels and seeds and print the summary.
    Table(TableArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    lambda: LambdaMode,
    /// `auto`, `theory` or a non-negative number.
    #[arg(long, default_value = "auto")]
    beta: BetaMode,
    /// Run everything on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    env: EnvKind,
    #[arg(long, default_value = "rbf")]
    kernel: KernelChoice,
    /// Gaussian bandwidth; defaults to the task's value.
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    eval_episodes: usize,
    /// `greedy` (argmax of the ridge estimate) or `ucb`.
    #[arg(long, default_value = "greedy")]
    eval_policy: EvalPolicy,
    /// `goal` or `affine`.
    #[arg(long, default_value = "goal")]
    reward_map: RewardMap,
    /// Directory for train.csv and eval.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recurrence-vs-direct width check interval; 0 disables it.
    #[arg(long, default_value_t = 100)]
    check_every: usize,
}

#[derive(Args)]
struct RegretArgs {
    /// MDP table file.
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long, default_value = "rbf")]
    kernel: KernelChoice,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Overrides the discount in the MDP file.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value = "auto")]
    lambda: LambdaMode,
    #[arg(long, default_value = "auto")]
    beta: BetaMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    tail_tol: f64,
    /// CSV file for `t,cum_regret,theory_bound`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ChecksArgs {
    /// Comma-separated instance sizes.
    #[arg(long, default_value = "10,20,30,40")]
    sizes: String,
    /// Comma-separated seeds, or a range `a..b`.
    #[arg(long, default_value = "0..25")]
    seeds: String,
    /// Print every record, not just failures.
    #[arg(long)]
    verbose: bool,
    /// Corrupt one instance to confirm failures are reported.
    #[arg(long)]
    inject_fault: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_delimiter = ',', default_value = "mountaincar,pendulum,acrobot,cartpole")]
    envs: Vec<EnvKind>,
    #[arg(long, value_delimiter = ',', default_value = "linear,rbf")]
    kernels: Vec<KernelChoice>,
    #[arg(long, default_value = "0..5")]
    seeds: String,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    eval_episodes: usize,
    #[arg(long, default_value = "greedy")]
    eval_policy: EvalPolicy,
    #[arg(long, default_value = "goal")]
    reward_map: RewardMap,
    /// Directory for per-run CSVs, one subdirectory per run.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || KqlError::Config(format!("cannot parse seeds '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    parse_list(s)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| KqlError::Config(format!("cannot parse '{t}' in '{s}'"))))
        .collect()
}

fn train(args: TrainArgs) -> Result<ExitCode> {
    let cfg = RunConfig {
        env: args.env,
        kernel: args.kernel,
        eta: args.eta,
        gamma: args.common.gamma,
        steps: args.common.steps,
        lambda: args.common.lambda,
        beta: args.common.beta,
        seed: args.seed,
        eval_episodes: args.eval_episodes,
        eval_policy: args.eval_policy,
        reward_map: args.reward_map,
        consistency_check_every: (args.check_every > 0).then_some(args.check_every),
        exec: args.common.exec(),
    };
    let log = run_experiment(&cfg)?;
    if let Some(dir) = &args.out {
        log.write_csv(dir)?;
    }
    let (mean, std) = mean_std(&log.eval_returns)?;
    println!("env {} kernel {} seed {}", cfg.env, cfg.kernel.as_str(), cfg.seed);
    println!("lambda {:e} beta {:e}", log.lambda, log.beta);
    println!("train episodes {}", log.train.iter().filter(|r| r.done).count());
    println!("eval return {mean:.3} ± {std:.3} over {} episodes", log.eval_returns.len());
    println!(
        "width checks {} max gap {:e}",
        log.diagnostics.consistency_checks, log.diagnostics.max_width_gap
    );
    Ok(ExitCode::SUCCESS)
}

fn regret(args: RegretArgs) -> Result<ExitCode> {
    let mdp = FiniteMdp::load(&args.mdp)?;
    let cfg = RegretConfig {
        kernel: args.kernel,
        eta: args.eta,
        gamma: args.gamma,
        lambda: args.lambda,
        beta: args.beta,
        seed: args.seed,
        tail_tol: args.tail_tol,
        exec: if args.sequential { Exec::Sequential } else { Exec::default() },
        ..RegretConfig::new(mdp, args.steps)
    };
    let log = run_regret(&cfg)?;
    if let Some(path) = &args.out {
        log.write_csv(path)?;
    }
    println!("steps {} (run {}) gamma {} lambda {:e} beta {:e}", args.steps, log.run_steps, log.gamma, log.lambda, log.beta);
    println!("regret {:.6} per step {:.6}", log.total(), log.total() / args.steps as f64);
    println!("d_eff {:.4}", log.d_eff);
    let violations = log.bound_violations();
    println!(
        "bound (constant 1): {} of {} steps above it",
        violations.len(),
        log.points.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn checks(args: ChecksArgs) -> Result<ExitCode> {
    let seeds = parse_seeds(&args.seeds)?;
    let sizes: Vec<usize> = parse_list(&args.sizes)?;
    let opts = CheckOptions {
        inject_fault: args.inject_fault,
        exec: if args.sequential { Exec::Sequential } else { Exec::default() },
        ..CheckOptions::default()
    };
    let report = run_checks(&sizes, &seeds, &opts)?;
    for r in &report.records {
        if args.verbose || !r.passed {
            println!("{r}");
        }
    }
    let failed = report.failures().count();
    println!(
        "{} instances, {} checks, {} failed",
        report.instances,
        report.records.len(),
        failed
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn table(args: TableArgs) -> Result<ExitCode> {
    let seeds = parse_seeds(&args.seeds)?;
    let mut logs = Vec::new();
    for &env in &args.envs {
        for &kernel in &args.kernels {
            let cfg = RunConfig {
                gamma: args.common.gamma,
                steps: args.common.steps,
                lambda: args.common.lambda,
                beta: args.common.beta,
                eval_episodes: args.eval_episodes,
                eval_policy: args.eval_policy,
                reward_map: args.reward_map,
                exec: args.common.exec(),
                ..RunConfig::new(env, kernel)
            };
            for log in run_seeds(&cfg, &seeds)? {
                eprintln!(
                    "{env} {} seed {}: {:.3}",
                    kernel.as_str(),
                    log.config.seed,
                    log.eval_mean()
                );
                if let Some(dir) = &args.out {
                    log.write_csv(&dir.join(format!("{env}-{}-seed{}", kernel.as_str(), log.config.seed)))?;
                }
                logs.push(log);
            }
        }
    }
    print!("{}", summarize(&logs)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Regret(a) => regret(a),
        Command::Checks(a) => checks(a),
        Command::Table(a) => table(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
