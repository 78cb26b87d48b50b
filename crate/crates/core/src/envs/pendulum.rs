use std::f64::consts::PI;

use rand::Rng;

use super::{check_action, env_rng, EnvRng, Environment, StepOutcome};
use crate::error::Result;
use crate::features::StateBounds;

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const DT: f64 = 0.05;
const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];
const EPISODE_CAP: usize = 200;
/// `pi^2 + 0.1 * 8^2 + 0.001 * 2^2`, the largest per-step cost.
pub const MAX_COST: f64 = 16.273_604_4;

/// Inverted pendulum swing-up with a discretized torque set `{-1, 0, 1}`,
/// integrated with semi-implicit Euler. Raw reward is minus the quadratic
/// cost.
#[derive(Debug, Clone)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    steps: usize,
    rng: EnvRng,
}

fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Pendulum {
    pub fn new(seed: u64) -> Self {
        let mut env = Self {
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            rng: env_rng(seed),
        };
        env.reset();
        env
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
    }

    pub fn cost(theta: f64, theta_dot: f64, torque: f64) -> f64 {
        angle_normalize(theta).powi(2) + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque
    }

    pub fn dynamics(theta: f64, theta_dot: f64, action: usize) -> (f64, f64) {
        let u = TORQUES[action].clamp(-MAX_TORQUE, MAX_TORQUE);
        let acc = 3.0 * GRAVITY / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        let new_dot = (theta_dot + acc * DT).clamp(-MAX_SPEED, MAX_SPEED);
        (theta + new_dot * DT, new_dot)
    }

    pub fn normalize_reward(raw: f64) -> f64 {
        ((raw + MAX_COST) / MAX_COST).clamp(0.0, 1.0)
    }
}

impl Environment for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn observation_bounds(&self) -> StateBounds {
        StateBounds::symmetric(&[1.0, 1.0, MAX_SPEED]).expect("static bounds")
    }

    fn episode_cap(&self) -> usize {
        EPISODE_CAP
    }

    /// `(cos theta, sin theta, theta_dot)`
    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    fn reset(&mut self) -> Vec<f64> {
        self.theta = self.rng.random_range(-PI..PI);
        self.theta_dot = self.rng.random_range(-1.0..1.0);
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 3)?;
        let raw_reward = -Self::cost(self.theta, self.theta_dot, TORQUES[action]);
        let (theta, theta_dot) = Self::dynamics(self.theta, self.theta_dot, action);
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            raw_reward,
            reward: Self::normalize_reward(raw_reward),
            terminated: false,
            truncated: self.steps >= EPISODE_CAP,
        })
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = env_rng(seed);
    }
}
