use rand::Rng;

use super::{check_action, env_rng, EnvRng, Environment, StepOutcome};
use crate::error::Result;
use crate::features::StateBounds;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
/// Half the pole length.
const LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
const X_THRESHOLD: f64 = 2.4;
const EPISODE_CAP: usize = 200;
// Soft velocity bounds for normalization; values beyond are clipped.
const X_DOT_BOUND: f64 = 3.0;
const THETA_DOT_BOUND: f64 = 3.5;

/// Cart-pole balancing with explicit Euler integration. Actions: 0 pushes
/// left, 1 pushes right. Reward 1 for every step, including the failing one.
#[derive(Debug, Clone)]
pub struct CartPole {
    state: [f64; 4],
    steps: usize,
    rng: EnvRng,
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        let mut env = Self {
            state: [0.0; 4],
            steps: 0,
            rng: env_rng(seed),
        };
        env.reset();
        env
    }

    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.steps = 0;
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// One Euler step of the cart-pole equations of motion.
    pub fn dynamics(state: [f64; 4], action: usize) -> [f64; 4] {
        let [x, x_dot, theta, theta_dot] = state;
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc =
            (GRAVITY * sin - cos * temp) / (LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ]
    }
}

impl Environment for CartPole {
    fn name(&self) -> &'static str {
        "cartpole"
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn observation_bounds(&self) -> StateBounds {
        StateBounds::symmetric(&[X_THRESHOLD, X_DOT_BOUND, THETA_THRESHOLD, THETA_DOT_BOUND])
            .expect("static bounds")
    }

    fn episode_cap(&self) -> usize {
        EPISODE_CAP
    }

    fn observation(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn reset(&mut self) -> Vec<f64> {
        for v in &mut self.state {
            *v = self.rng.random_range(-0.05..0.05);
        }
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 2)?;
        self.state = Self::dynamics(self.state, action);
        self.steps += 1;
        let [x, _, theta, _] = self.state;
        let terminated = x.abs() > X_THRESHOLD || theta.abs() > THETA_THRESHOLD;
        Ok(StepOutcome {
            observation: self.observation(),
            raw_reward: 1.0,
            reward: 1.0,
            terminated,
            truncated: !terminated && self.steps >= EPISODE_CAP,
        })
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = env_rng(seed);
    }
}
