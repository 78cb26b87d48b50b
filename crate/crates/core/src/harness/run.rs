use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::agent::{default_beta, default_lambda, AgentConfig, Diagnostics, EvalPolicy, KqlAgent};
use crate::dimension::{theoretical_beta, KernelDescriptor, TheoryParams};
use crate::envs::{EnvKind, Environment, RewardMap};
use crate::error::{KqlError, Result};
use crate::features::KernelSpec;
use crate::par::{self, Exec};

/// Mixed into the run seed to seed the evaluation environment.
pub const EVAL_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelChoice {
    Linear,
    Rbf,
}

impl KernelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelChoice::Linear => "linear",
            KernelChoice::Rbf => "rbf",
        }
    }

    pub fn spec(self, eta: f64, state_dim: usize, num_actions: usize) -> Result<KernelSpec> {
        match self {
            KernelChoice::Linear => Ok(KernelSpec::linear(state_dim, num_actions)),
            KernelChoice::Rbf => KernelSpec::gaussian(eta, state_dim, num_actions),
        }
    }
}

impl FromStr for KernelChoice {
    type Err = KqlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelChoice::Linear),
            "rbf" | "gaussian" => Ok(KernelChoice::Rbf),
            other => Err(KqlError::Config(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// `1 / (10 T)`.
    Auto,
    Fixed(f64),
}

impl LambdaMode {
    pub fn resolve(self, steps: usize) -> f64 {
        match self {
            LambdaMode::Auto => default_lambda(steps),
            LambdaMode::Fixed(v) => v,
        }
    }
}

impl FromStr for LambdaMode {
    type Err = KqlError;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(LambdaMode::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(LambdaMode::Fixed(v)),
            _ => Err(KqlError::Config(format!("lambda must be 'auto' or a positive number, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode {
    /// `sqrt(lambda) / (1 - gamma)`.
    Auto,
    /// Coefficient from the regret theorem in the deterministic setting.
    Theory,
    Fixed(f64),
}

impl BetaMode {
    pub fn resolve(self, kernel: &KernelSpec, steps: usize, gamma: f64, lambda: f64) -> Result<f64> {
        match self {
            BetaMode::Auto => Ok(default_beta(lambda, gamma)),
            BetaMode::Fixed(v) => Ok(v),
            BetaMode::Theory => {
                let params = TheoryParams::deterministic(KernelDescriptor::from_spec(kernel), steps, gamma, lambda)?;
                theoretical_beta(&params)
            }
        }
    }
}

impl FromStr for BetaMode {
    type Err = KqlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(BetaMode::Auto),
            "theory" => Ok(BetaMode::Theory),
            _ => match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(BetaMode::Fixed(v)),
                _ => Err(KqlError::Config(format!(
                    "beta must be 'auto', 'theory' or a non-negative number, got '{s}'"
                ))),
            },
        }
    }
}

impl FromStr for EvalPolicy {
    type Err = KqlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(EvalPolicy::GreedyQHat),
            "ucb" => Ok(EvalPolicy::Ucb),
            other => Err(KqlError::Config(format!("unknown evaluation policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub kernel: KernelChoice,
    /// Gaussian bandwidth; `None` uses the environment default.
    pub eta: Option<f64>,
    pub gamma: f64,
    pub steps: usize,
    pub lambda: LambdaMode,
    pub beta: BetaMode,
    pub seed: u64,
    pub eval_episodes: usize,
    pub eval_policy: EvalPolicy,
    pub reward_map: RewardMap,
    pub consistency_check_every: Option<usize>,
    pub exec: Exec,
}

impl RunConfig {
    pub fn new(env: EnvKind, kernel: KernelChoice) -> Self {
        Self {
            env,
            kernel,
            eta: None,
            gamma: 0.95,
            steps: 1000,
            lambda: LambdaMode::Auto,
            beta: BetaMode::Auto,
            seed: 0,
            eval_episodes: 100,
            eval_policy: EvalPolicy::GreedyQHat,
            reward_map: RewardMap::default(),
            consistency_check_every: Some(100),
            exec: Exec::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| self.env.default_eta())
    }

    /// Agent configuration for an environment with the given shape.
    pub fn agent_config(&self, state_dim: usize, num_actions: usize) -> Result<AgentConfig> {
        let kernel = self.kernel.spec(self.eta(), state_dim, num_actions)?;
        let lambda = self.lambda.resolve(self.steps);
        let beta = self.beta.resolve(&kernel, self.steps, self.gamma, lambda)?;
        let cfg = AgentConfig::new(self.steps, self.gamma, kernel)
            .with_lambda(lambda)
            .with_beta(beta)
            .with_consistency_check(self.consistency_check_every)
            .with_exec(self.exec);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step index.
    pub t: usize,
    pub episode: usize,
    pub action: usize,
    pub raw_reward: f64,
    pub norm_reward: f64,
    pub done: bool,
    /// Optimistic value of the chosen action when it was chosen.
    pub q_tilde: f64,
    pub width: f64,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub config: RunConfig,
    pub lambda: f64,
    pub beta: f64,
    pub train: Vec<StepRecord>,
    /// Undiscounted raw return of each evaluation episode.
    pub eval_returns: Vec<f64>,
    pub diagnostics: Diagnostics,
    /// Learned-state digest before and after evaluation.
    pub digest_before_eval: u64,
    pub digest_after_eval: u64,
}

impl RunLog {
    pub fn eval_mean(&self) -> f64 {
        if self.eval_returns.is_empty() {
            return f64::NAN;
        }
        self.eval_returns.iter().sum::<f64>() / self.eval_returns.len() as f64
    }

    /// Writes `train.csv` and `eval.csv` into `dir`, creating it if needed.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("train.csv"))?;
        w.write_record(["t", "episode", "action", "raw_reward", "norm_reward", "done", "q_tilde", "width"])?;
        for r in &self.train {
            w.write_record([
                r.t.to_string(),
                r.episode.to_string(),
                r.action.to_string(),
                r.raw_reward.to_string(),
                r.norm_reward.to_string(),
                u8::from(r.done).to_string(),
                r.q_tilde.to_string(),
                r.width.to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("eval.csv"))?;
        w.write_record(["episode", "raw_return"])?;
        for (i, r) in self.eval_returns.iter().enumerate() {
            w.write_record([i.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trains for exactly `steps` environment steps, resetting only at episode
/// ends, then evaluates on a separately seeded copy of the environment.
pub fn run_experiment(config: &RunConfig) -> Result<RunLog> {
    if config.eval_episodes == 0 {
        return Err(KqlError::Config("need at least one evaluation episode".into()));
    }
    let mut env = config.env.make(config.seed, config.reward_map);
    let agent_cfg = config.agent_config(env.observation_dim(), env.num_actions())?;
    let (lambda, beta) = (agent_cfg.lambda, agent_cfg.beta);
    let mut agent = KqlAgent::new(agent_cfg, env.observation_bounds())?;

    let mut train = Vec::with_capacity(config.steps);
    let mut state = env.reset();
    let mut episode = 0;
    for t in 1..=config.steps {
        let (action, values) = agent.select_action_with_values(&state)?;
        let out = env.step(action)?;
        agent.observe(&state, action, out.reward, &out.observation, out.terminated)?;
        train.push(StepRecord {
            t,
            episode,
            action,
            raw_reward: out.raw_reward,
            norm_reward: out.reward,
            done: out.done(),
            q_tilde: values[action].q_tilde,
            width: values[action].width,
        });
        if out.done() {
            state = env.reset();
            episode += 1;
        } else {
            state = out.observation;
        }
    }

    let digest_before_eval = agent.state_digest();
    let mut eval_env = config.env.make(config.seed ^ EVAL_SEED_SALT, config.reward_map);
    let eval_returns = evaluate(&agent, eval_env.as_mut(), config.eval_episodes, config.eval_policy)?;
    Ok(RunLog {
        config: config.clone(),
        lambda,
        beta,
        train,
        eval_returns,
        diagnostics: agent.diagnostics(),
        digest_before_eval,
        digest_after_eval: agent.state_digest(),
        })
}

/// Raw undiscounted return of each of `episodes` episodes under a frozen
/// agent.
pub fn evaluate(agent: &KqlAgent, env: &mut dyn Environment, episodes: usize, kind: EvalPolicy) -> Result<Vec<f64>> {
    let policy = agent.policy(kind);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = env.reset();
        let mut total = 0.0;
        loop {
            let out = env.step(policy(&s)?)?;
            total += out.raw_reward;
            if out.done() {
                break;
            }
            s = out.observation;
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Runs `config` once per seed, fanning out over seeds.
pub fn run_seeds(config: &RunConfig, seeds: &[u64]) -> Result<Vec<RunLog>> {
    par::map_jobs(config.exec, seeds, |&s| run_experiment(&config.clone().with_seed(s)))
        .into_iter()
        .collect()
}
