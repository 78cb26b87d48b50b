use std::path::Path;

use rand::Rng;

use super::{check_action, env_rng, EnvRng, Environment, StepOutcome};
use crate::error::{KqlError, Result};
use crate::features::StateBounds;

const ROW_SUM_TOL: f64 = 1e-12;

/// Explicit finite MDP with rewards in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    /// `transition[s][a][s']`
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    /// Discount stored with the table, if it was loaded from text.
    gamma: Option<f64>,
}

impl FiniteMdp {
    pub fn new(transition: Vec<Vec<Vec<f64>>>, reward: Vec<Vec<f64>>) -> Result<Self> {
        let num_states = transition.len();
        if num_states == 0 {
            return Err(KqlError::InvalidInput("MDP has no states".into()));
        }
        let num_actions = transition[0].len();
        if num_actions == 0 {
            return Err(KqlError::InvalidInput("MDP has no actions".into()));
        }
        if reward.len() != num_states {
            return Err(KqlError::InvalidInput("reward table has wrong number of states".into()));
        }
        for s in 0..num_states {
            if transition[s].len() != num_actions || reward[s].len() != num_actions {
                return Err(KqlError::InvalidInput(format!("state {s} has wrong number of actions")));
            }
            for a in 0..num_actions {
                let row = &transition[s][a];
                if row.len() != num_states {
                    return Err(KqlError::InvalidInput(format!("transition row ({s}, {a}) has wrong length")));
                }
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(KqlError::InvalidInput(format!("transition row ({s}, {a}) has invalid entries")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(KqlError::InvalidInput(format!("transition row ({s}, {a}) sums to {sum}")));
                }
                if !(0.0..=1.0).contains(&reward[s][a]) {
                    return Err(KqlError::InvalidInput(format!(
                        "reward ({s}, {a}) = {} outside [0, 1]",
                        reward[s][a]
                    )));
                }
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward,
            gamma: None,
        })
    }

    /// Deterministic chain of `n` states. Action 1 moves right, action 0
    /// moves left (both saturate at the ends). Moving right at the last
    /// state pays 1; moving left at state 0 pays `lure`.
    pub fn chain(n: usize, lure: f64) -> Result<Self> {
        let mut transition = vec![vec![vec![0.0; n]; 2]; n];
        let mut reward = vec![vec![0.0; 2]; n];
        for s in 0..n {
            transition[s][0][s.saturating_sub(1)] = 1.0;
            transition[s][1][(s + 1).min(n - 1)] = 1.0;
        }
        reward[n - 1][1] = 1.0;
        reward[0][0] = lure;
        Self::new(transition, reward)
    }

    /// Parses the text table format.
    ///
    /// ```text
    /// <states> <actions> <gamma>
    /// <s> <a> <r> <p(s'=0)> <p(s'=1)> ...
    /// ```
    ///
    /// One line per `(s, a)` pair; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| KqlError::InvalidInput("empty MDP file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(KqlError::InvalidInput(format!("bad header '{header}'")));
        }
        let parse_usize = |v: &str, what: &str| {
            v.parse::<usize>()
                .map_err(|_| KqlError::InvalidInput(format!("bad {what} '{v}'")))
        };
        let parse_f64 = |v: &str, line: usize| {
            v.parse::<f64>()
                .map_err(|_| KqlError::InvalidInput(format!("line {}: bad number '{v}'", line + 1)))
        };
        let num_states = parse_usize(head[0], "state count")?;
        let num_actions = parse_usize(head[1], "action count")?;
        let gamma = parse_f64(head[2], 0)?;
        if num_states == 0 || num_actions == 0 {
            return Err(KqlError::InvalidInput("state and action counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(KqlError::InvalidInput(format!("gamma = {gamma} not in [0, 1)")));
        }
        let mut transition = vec![vec![Vec::new(); num_actions]; num_states];
        let mut reward = vec![vec![f64::NAN; num_actions]; num_states];
        let mut seen = vec![vec![false; num_actions]; num_states];
        for (no, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 + num_states {
                return Err(KqlError::InvalidInput(format!(
                    "line {}: expected {} fields, found {}",
                    no + 1,
                    3 + num_states,
                    fields.len()
                )));
            }
            let s = parse_usize(fields[0], "state")?;
            let a = parse_usize(fields[1], "action")?;
            if s >= num_states || a >= num_actions {
                return Err(KqlError::InvalidInput(format!("line {}: ({s}, {a}) out of range", no + 1)));
            }
            if seen[s][a] {
                return Err(KqlError::InvalidInput(format!("line {}: duplicate pair ({s}, {a})", no + 1)));
            }
            seen[s][a] = true;
            reward[s][a] = parse_f64(fields[2], no)?;
            transition[s][a] = fields[3..]
                .iter()
                .map(|v| parse_f64(v, no))
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(s) = seen.iter().position(|row| row.iter().any(|v| !v)) {
            return Err(KqlError::InvalidInput(format!("missing rows for state {s}")));
        }
        let mut mdp = Self::new(transition, reward)?;
        mdp.gamma = Some(gamma);
        Ok(mdp)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KqlError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Text form accepted by [`FiniteMdp::parse`].
    pub fn to_text(&self, gamma: f64) -> String {
        let mut out = format!("{} {} {}\n", self.num_states, self.num_actions, gamma);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                out.push_str(&format!("{s} {a} {}", self.reward[s][a]));
                for p in &self.transition[s][a] {
                    out.push_str(&format!(" {p}"));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s][a]
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    /// One-hot encoding of a state.
    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        (0..self.num_states).map(|i| if i == s { 1.0 } else { 0.0 }).collect()
    }

    fn q_backup(&self, v: &[f64], gamma: f64, s: usize, a: usize) -> f64 {
        let ev: f64 = self.transition[s][a].iter().zip(v).map(|(p, x)| p * x).sum();
        self.reward[s][a] + gamma * ev
    }
}

/// Optimal values of a finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleValues {
    pub gamma: f64,
    pub v_star: Vec<f64>,
    pub q_star: Vec<Vec<f64>>,
    pub policy_star: Vec<usize>,
    /// Sup-norm Bellman residual of `v_star`.
    pub residual: f64,
}

/// Iterates the Bellman optimality operator until its residual is at most
/// `tol`.
pub fn value_iteration(mdp: &FiniteMdp, gamma: f64, tol: f64) -> Result<OracleValues> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(KqlError::InvalidArgument(format!("gamma = {gamma} not in [0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(KqlError::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let n = mdp.num_states;
    let mut v = vec![0.0; n];
    let backup = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|s| {
                (0..mdp.num_actions)
                    .map(|a| mdp.q_backup(v, gamma, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    };
    let residual = loop {
        let next = backup(&v);
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff <= tol * (1.0 - gamma) {
            // residual of the new iterate is at most gamma * diff
            let again = backup(&v);
            break again.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        }
    };
    let q_star: Vec<Vec<f64>> = (0..n)
        .map(|s| (0..mdp.num_actions).map(|a| mdp.q_backup(&v, gamma, s, a)).collect())
        .collect();
    let policy_star = q_star
        .iter()
        .map(|q| {
            let mut best = 0;
            for a in 1..q.len() {
                if q[a] > q[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    Ok(OracleValues {
        gamma,
        v_star: v,
        q_star,
        policy_star,
        residual,
    })
}

/// Truncated discounted return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedReturn {
    pub value: f64,
    /// `gamma^len / (1 - gamma)`, the largest possible contribution of the
    /// unobserved tail when rewards lie in `[0, 1]`.
    pub truncation_bound: f64,
    pub within_tolerance: bool,
}

pub fn discounted_return(rewards: &[f64], gamma: f64, tail_tol: f64) -> DiscountedReturn {
    let value = rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc);
    let truncation_bound = gamma.powi(rewards.len() as i32) / (1.0 - gamma);
    DiscountedReturn {
        value,
        truncation_bound,
        within_tolerance: truncation_bound <= tail_tol,
    }
}

/// Cumulative discounted regret along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    /// `(1 - gamma)(V*(s_t) - V_t)` for every counted step.
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub total: f64,
}

/// `(1 - gamma) sum_t (V*(s_t) - V_t)` over the steps whose return
/// truncation bound is within `tail_tol`. `states[t]` is the state at step
/// `t` and `rewards[t]` the reward collected there.
pub fn regret(states: &[usize], rewards: &[f64], oracle: &OracleValues, tail_tol: f64) -> Result<RegretCurve> {
    if states.len() != rewards.len() {
        return Err(KqlError::InvalidArgument(format!(
            "{} states but {} rewards",
            states.len(),
            rewards.len()
        )));
    }
    if let Some(&s) = states.iter().find(|&&s| s >= oracle.v_star.len()) {
        return Err(KqlError::InvalidArgument(format!(
            "state {s} not covered by an oracle over {} states",
            oracle.v_star.len()
        )));
    }
    let gamma = oracle.gamma;
    let len = rewards.len();
    let mut returns = vec![0.0; len];
    let mut acc = 0.0;
    for t in (0..len).rev() {
        acc = rewards[t] + gamma * acc;
        returns[t] = acc;
    }
    let mut per_step = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    for t in 0..len {
        if gamma.powi((len - t) as i32) / (1.0 - gamma) > tail_tol {
            break;
        }
        let r = (1.0 - gamma) * (oracle.v_star[states[t]] - returns[t]);
        total += r;
        per_step.push(r);
        cumulative.push(total);
    }
    Ok(RegretCurve {
        per_step,
        cumulative,
        total,
    })
}

/// A [`FiniteMdp`] as an [`Environment`] that starts in state 0 and never
/// terminates.
#[derive(Debug, Clone)]
pub struct FiniteMdpEnv {
    mdp: FiniteMdp,
    state: usize,
    rng: EnvRng,
}

impl FiniteMdpEnv {
    pub fn new(mdp: FiniteMdp, seed: u64) -> Self {
        Self {
            mdp,
            state: 0,
            rng: env_rng(seed),
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }
}

impl Environment for FiniteMdpEnv {
    fn name(&self) -> &'static str {
        "finite-mdp"
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions
    }

    fn observation_bounds(&self) -> StateBounds {
        StateBounds::symmetric(&vec![1.0; self.mdp.num_states]).expect("static bounds")
    }

    fn episode_cap(&self) -> usize {
        usize::MAX
    }

    fn observation(&self) -> Vec<f64> {
        self.mdp.one_hot(self.state)
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, self.mdp.num_actions)?;
        let reward = self.mdp.reward[self.state][action];
        let u: f64 = self.rng.random();
        let row = &self.mdp.transition[self.state][action];
        let mut acc = 0.0;
        let mut next = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (s, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = s;
                break;
            }
        }
        self.state = next;
        Ok(StepOutcome {
            observation: self.observation(),
            raw_reward: reward,
            reward,
            terminated: false,
            truncated: false,
        })
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = env_rng(seed);
    }
}
