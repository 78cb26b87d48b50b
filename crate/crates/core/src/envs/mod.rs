//! Deterministic classic-control environments and a finite MDP with an
//! exact value-iteration oracle.
//!
//! Every environment exposes an observation vector, documented bounds used
//! to normalize it into `[-1, 1]`, a discrete action set, and a reward
//! normalized into `[0, 1]` next to the raw reward.

mod acrobot;
mod cartpole;
mod finite_mdp;
mod mountain_car;
mod pendulum;

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use finite_mdp::{
    discounted_return, regret, value_iteration, DiscountedReturn, FiniteMdp, FiniteMdpEnv, OracleValues,
    RegretCurve,
};
pub use mountain_car::MountainCar;
pub use pendulum::Pendulum;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{KqlError, Result};
use crate::features::StateBounds;

pub type EnvRng = ChaCha8Rng;

pub fn env_rng(seed: u64) -> EnvRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub raw_reward: f64,
    /// Reward mapped into `[0, 1]`.
    pub reward: f64,
    /// The task itself ended (goal reached or failure).
    pub terminated: bool,
    /// The episode cap was hit without termination.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// How the constant per-step penalty of goal-reaching tasks is mapped into
/// `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardMap {
    /// 0 per step, 1 on the goal-reaching step.
    #[default]
    GoalBonus,
    /// Affine map of the raw range; constant penalties all become 0.
    Affine,
}

impl FromStr for RewardMap {
    type Err = KqlError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "goal" | "goal-bonus" | "default" => Ok(RewardMap::GoalBonus),
            "affine" => Ok(RewardMap::Affine),
            other => Err(KqlError::Config(format!("unknown reward map '{other}'"))),
        }
    }
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn num_actions(&self) -> usize;
    fn observation_bounds(&self) -> StateBounds;
    fn episode_cap(&self) -> usize;
    fn observation(&self) -> Vec<f64>;
    /// Draws a fresh initial state from the environment's own RNG stream.
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
    /// Reseeds the reset stream.
    fn reseed(&mut self, seed: u64);

    /// Reseeds, then resets.
    fn reset_with_seed(&mut self, seed: u64) -> Vec<f64> {
        self.reseed(seed);
        self.reset()
    }

    fn observation_dim(&self) -> usize {
        self.observation_bounds().dim()
    }
}

pub(crate) fn check_action(action: usize, n: usize) -> Result<()> {
    if action >= n {
        return Err(KqlError::InvalidArgument(format!(
            "action {action} out of range for {n} actions"
        )));
    }
    Ok(())
}

/// Built-in control tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    MountainCar,
    Pendulum,
    Acrobot,
    CartPole,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [EnvKind::MountainCar, EnvKind::Pendulum, EnvKind::Acrobot, EnvKind::CartPole];

    /// Gaussian bandwidth used for this task.
    pub fn default_eta(self) -> f64 {
        match self {
            EnvKind::Pendulum => 1.0,
            _ => 0.02,
        }
    }

    pub fn make(self, seed: u64, reward_map: RewardMap) -> Box<dyn Environment> {
        match self {
            EnvKind::MountainCar => Box::new(MountainCar::new(seed, reward_map)),
            EnvKind::Pendulum => Box::new(Pendulum::new(seed)),
            EnvKind::Acrobot => Box::new(Acrobot::new(seed, reward_map)),
            EnvKind::CartPole => Box::new(CartPole::new(seed)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::MountainCar => "mountaincar",
            EnvKind::Pendulum => "pendulum",
            EnvKind::Acrobot => "acrobot",
            EnvKind::CartPole => "cartpole",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = KqlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mountaincar" | "mountain-car" => Ok(EnvKind::MountainCar),
            "pendulum" => Ok(EnvKind::Pendulum),
            "acrobot" => Ok(EnvKind::Acrobot),
            "cartpole" | "cart-pole" => Ok(EnvKind::CartPole),
            other => Err(KqlError::Config(format!("unknown environment '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn parse_names() {
        for k in EnvKind::ALL {
            assert_eq!(k.as_str().parse::<EnvKind>().unwrap(), k);
        }
        assert!(matches!("lunar".parse::<EnvKind>(), Err(KqlError::Config(_))));
    }

    #[test]
    fn random_play_respects_contracts() {
        for kind in EnvKind::ALL {
            for map in [RewardMap::GoalBonus, RewardMap::Affine] {
                let mut env = kind.make(1, map);
                let bounds = env.observation_bounds();
                let mut rng = env_rng(99);
                env.reset();
                let mut len = 0;
                let mut episodes = 0;
                for _ in 0..100_000 {
                    let a = rng.random_range(0..env.num_actions());
                    let out = env.step(a).unwrap();
                    len += 1;
                    assert!((0.0..=1.0).contains(&out.reward), "{kind}: reward {}", out.reward);
                    assert_eq!(out.observation.len(), bounds.dim());
                    assert!(bounds.normalize(&out.observation).unwrap().iter().all(|v| v.abs() <= 1.0));
                    assert!(len <= env.episode_cap());
                    if out.done() {
                        if len == env.episode_cap() && !out.terminated {
                            assert!(out.truncated);
                        }
                        episodes += 1;
                        len = 0;
                        env.reset();
                    }
                }
                assert!(episodes > 0);
                assert!(env.step(env.num_actions()).is_err());
            }
        }
    }

    #[test]
    fn reset_is_deterministic() {
        for kind in EnvKind::ALL {
            let mut a = kind.make(0, RewardMap::GoalBonus);
            let mut b = kind.make(5, RewardMap::GoalBonus);
            assert_eq!(a.reset_with_seed(42), b.reset_with_seed(42));
            assert_eq!(a.step(0).unwrap(), b.step(0).unwrap());
        }
    }
}
