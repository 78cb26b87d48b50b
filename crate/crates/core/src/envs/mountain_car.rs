use rand::Rng;

use super::{check_action, env_rng, EnvRng, Environment, RewardMap, StepOutcome};
use crate::error::Result;
use crate::features::StateBounds;

const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.5;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;
const EPISODE_CAP: usize = 200;

/// Under-powered car in a valley. Actions: 0 push left, 1 coast, 2 push
/// right. Raw reward is -1 per step.
#[derive(Debug, Clone)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    steps: usize,
    reward_map: RewardMap,
    rng: EnvRng,
}

impl MountainCar {
    pub fn new(seed: u64, reward_map: RewardMap) -> Self {
        let mut env = Self {
            position: -0.5,
            velocity: 0.0,
            steps: 0,
            reward_map,
            rng: env_rng(seed),
        };
        env.reset();
        env
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
    }

    pub fn dynamics(position: f64, velocity: f64, action: usize) -> (f64, f64) {
        let mut v = velocity + (action as f64 - 1.0) * FORCE + (3.0 * position).cos() * (-GRAVITY);
        v = v.clamp(-MAX_SPEED, MAX_SPEED);
        let p = (position + v).clamp(MIN_POSITION, MAX_POSITION);
        if p == MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        (p, v)
    }
}

impl Environment for MountainCar {
    fn name(&self) -> &'static str {
        "mountaincar"
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn observation_bounds(&self) -> StateBounds {
        StateBounds::new(vec![MIN_POSITION, -MAX_SPEED], vec![MAX_POSITION, MAX_SPEED]).expect("static bounds")
    }

    fn episode_cap(&self) -> usize {
        EPISODE_CAP
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }

    fn reset(&mut self) -> Vec<f64> {
        self.position = self.rng.random_range(-0.6..-0.4);
        self.velocity = 0.0;
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 3)?;
        let (p, v) = Self::dynamics(self.position, self.velocity, action);
        self.position = p;
        self.velocity = v;
        self.steps += 1;
        let terminated = p >= GOAL_POSITION;
        let reward = match self.reward_map {
            RewardMap::GoalBonus if terminated => 1.0,
            _ => 0.0,
        };
        Ok(StepOutcome {
            observation: self.observation(),
            raw_reward: -1.0,
            reward,
            terminated,
            truncated: !terminated && self.steps >= EPISODE_CAP,
        })
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = env_rng(seed);
    }
}
