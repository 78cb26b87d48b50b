use std::collections::HashMap;
use std::path::Path;

use crate::agent::{AgentConfig, KqlAgent};
use crate::dimension::{
    c_lambda_bound, effective_dimension_of_multiset, regret_bound, BoundForm, KernelDescriptor, TheoryParams,
};
use crate::envs::{value_iteration, regret, Environment, FiniteMdp, FiniteMdpEnv};
use crate::error::{KqlError, Result};
use crate::features::FeatureVector;
use crate::par::Exec;

use super::run::{BetaMode, KernelChoice, LambdaMode};

const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RegretConfig {
    pub mdp: FiniteMdp,
    pub kernel: KernelChoice,
    pub eta: f64,
    /// Discount; `None` takes the MDP file's value, then 0.95.
    pub gamma: Option<f64>,
    /// Number of steps whose regret is reported.
    pub steps: usize,
    pub lambda: LambdaMode,
    pub beta: BetaMode,
    pub seed: u64,
    /// Largest admissible truncation bound on a step's realized return.
    pub tail_tol: f64,
    pub exec: Exec,
}

impl RegretConfig {
    pub fn new(mdp: FiniteMdp, steps: usize) -> Self {
        Self {
            mdp,
            kernel: KernelChoice::Rbf,
            eta: 1.0,
            gamma: None,
            steps,
            lambda: LambdaMode::Auto,
            beta: BetaMode::Auto,
            seed: 0,
            tail_tol: 1e-3,
            exec: Exec::default(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.or(self.mdp.gamma()).unwrap_or(0.95)
    }
}

/// Smallest `L` with `gamma^L / (1 - gamma) <= tail_tol`.
pub fn tail_length(gamma: f64, tail_tol: f64) -> Result<usize> {
    if !(tail_tol > 0.0) || !(0.0..1.0).contains(&gamma) {
        return Err(KqlError::InvalidArgument(format!(
            "need gamma in [0, 1) and tail_tol > 0, got {gamma}, {tail_tol}"
        )));
    }
    let mut l = 0usize;
    let mut bound = 1.0 / (1.0 - gamma);
    while bound > tail_tol {
        bound *= gamma;
        l += 1;
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretPoint {
    pub t: usize,
    pub cum_regret: f64,
    pub theory_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretLog {
    pub points: Vec<RegretPoint>,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Effective dimension of every visited state-action pair over the whole
    /// run, used as `d_lambda` in the bound column.
    pub d_eff: f64,
    /// Steps actually taken: `steps` plus the tail needed to value the last
    /// reported step.
    pub run_steps: usize,
    pub states: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl RegretLog {
    pub fn total(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.cum_regret)
    }

    /// Steps at which the empirical curve exceeds the bound.
    pub fn bound_violations(&self) -> Vec<usize> {
        self.points.iter().filter(|p| p.cum_regret > p.theory_bound).map(|p| p.t).collect()
    }

    /// Writes `t,cum_regret,theory_bound`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "cum_regret", "theory_bound"])?;
        for p in &self.points {
            w.write_record([p.t.to_string(), p.cum_regret.to_string(), p.theory_bound.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the agent on a finite MDP without resets and measures discounted
/// regret against the value-iteration oracle.
///
/// The run is extended past `steps` until the realized return of step
/// `steps` is known to within `tail_tol`.
pub fn run_regret(config: &RegretConfig) -> Result<RegretLog> {
    if config.steps == 0 {
        return Err(KqlError::Config("regret run needs at least one step".into()));
    }
    let gamma = config.gamma();
    let run_steps = config.steps + tail_length(gamma, config.tail_tol)?;
    let mut env = FiniteMdpEnv::new(config.mdp.clone(), config.seed);
    let (l, num_actions) = (env.observation_dim(), env.num_actions());
    let kernel = config.kernel.spec(config.eta, l, num_actions)?;
    let lambda = config.lambda.resolve(run_steps);
    let beta = config.beta.resolve(&kernel, run_steps, gamma, lambda)?;
    let agent_cfg = AgentConfig::new(run_steps, gamma, kernel)
        .with_lambda(lambda)
        .with_beta(beta)
        .with_consistency_check(None)
        .with_exec(config.exec);
    let mut agent = KqlAgent::new(agent_cfg, env.observation_bounds())?;

    let mut states = Vec::with_capacity(run_steps);
    let mut rewards = Vec::with_capacity(run_steps);
    let mut visits: HashMap<(usize, usize), usize> = HashMap::new();
    let mut obs = env.reset();
    for _ in 0..run_steps {
        let s = env.state();
        let a = agent.select_action(&obs)?;
        let out = env.step(a)?;
        agent.observe(&obs, a, out.reward, &out.observation, false)?;
        states.push(s);
        rewards.push(out.reward);
        *visits.entry((s, a)).or_default() += 1;
        obs = out.observation;
    }

    let oracle = value_iteration(&config.mdp, gamma, ORACLE_TOL)?;
    let curve = regret(&states, &rewards, &oracle, config.tail_tol)?;
    if curve.cumulative.len() < config.steps {
        return Err(KqlError::Numerical(format!(
            "only {} of {} steps have a return within tolerance",
            curve.cumulative.len(),
            config.steps
        )));
    }

    let mut pairs: Vec<((usize, usize), usize)> = visits.into_iter().collect();
    pairs.sort_unstable();
    let points: Vec<FeatureVector> = pairs
        .iter()
        .map(|&((s, a), _)| FeatureVector::from_normalized(&config.mdp.one_hot(s), a, num_actions))
        .collect::<Result<_>>()?;
    let counts: Vec<usize> = pairs.iter().map(|&(_, c)| c).collect();
    let d_eff = effective_dimension_of_multiset(&kernel, &points, &counts, lambda)?;

    let descriptor = KernelDescriptor::from_spec(&kernel);
    let stochastic = (0..config.mdp.num_states())
        .any(|s| (0..num_actions).any(|a| config.mdp.transition(s, a).iter().all(|&p| p < 1.0)));
    let points = curve.cumulative[..config.steps]
        .iter()
        .enumerate()
        .map(|(i, &cum)| {
            let t = i + 1;
            let params = TheoryParams {
                steps: t,
                gamma,
                lambda,
                rho: 1.0,
                epsilon: 0.0,
                sigma: if stochastic { 1.0 } else { 0.0 },
                p: 0.05,
                d_lambda: d_eff.max(1.0),
                c_lambda: c_lambda_bound(descriptor, t, lambda, gamma),
            };
            Ok(RegretPoint {
                t,
                cum_regret: cum,
                theory_bound: regret_bound(&params, BoundForm::Theorem)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RegretLog {
        points,
        lambda,
        beta,
        gamma,
        d_eff,
        run_steps,
        states,
        rewards,
    })
}
