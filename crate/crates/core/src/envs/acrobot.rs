use std::f64::consts::PI;

use rand::Rng;

use super::{check_action, env_rng, EnvRng, Environment, RewardMap, StepOutcome};
use crate::error::Result;
use crate::features::StateBounds;

const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_POS_1: f64 = 0.5;
const LINK_COM_POS_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
const MAX_VEL_1: f64 = 4.0 * PI;
const MAX_VEL_2: f64 = 9.0 * PI;
const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];
const DT: f64 = 0.2;
const EPISODE_CAP: usize = 500;

/// Two-link under-actuated swing-up, integrated with one RK4 step per
/// action. Raw reward is -1 per step and 0 on the step that reaches the
/// goal height.
#[derive(Debug, Clone)]
pub struct Acrobot {
    state: [f64; 4],
    steps: usize,
    reward_map: RewardMap,
    rng: EnvRng,
}

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    while x > hi {
        x -= span;
    }
    while x < lo {
        x += span;
    }
    x
}

/// Time derivative of `(theta1, theta2, dtheta1, dtheta2)` under `torque`.
fn derivative(s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2) = (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_POS_1, LINK_COM_POS_2);
    let (i1, i2, g) = (LINK_MOI, LINK_MOI, GRAVITY);
    let [theta1, theta2, dtheta1, dtheta2] = s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4(s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]];
    let k1 = derivative(s, torque);
    let k2 = derivative(add(s, k1, dt / 2.0), torque);
    let k3 = derivative(add(s, k2, dt / 2.0), torque);
    let k4 = derivative(add(s, k3, dt), torque);
    let mut out = s;
    for i in 0..4 {
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

impl Acrobot {
    pub fn new(seed: u64, reward_map: RewardMap) -> Self {
        let mut env = Self {
            state: [0.0; 4],
            steps: 0,
            reward_map,
            rng: env_rng(seed),
        };
        env.reset();
        env
    }

    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.steps = 0;
    }

    pub fn dynamics(state: [f64; 4], action: usize) -> [f64; 4] {
        let ns = rk4(state, TORQUES[action], DT);
        [
            wrap(ns[0], -PI, PI),
            wrap(ns[1], -PI, PI),
            ns[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            ns[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ]
    }

    fn is_terminal(s: [f64; 4]) -> bool {
        -s[0].cos() - (s[1] + s[0]).cos() > 1.0
    }
}

impl Environment for Acrobot {
    fn name(&self) -> &'static str {
        "acrobot"
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn observation_bounds(&self) -> StateBounds {
        StateBounds::symmetric(&[1.0, 1.0, 1.0, 1.0, MAX_VEL_1, MAX_VEL_2]).expect("static bounds")
    }

    fn episode_cap(&self) -> usize {
        EPISODE_CAP
    }

    /// `(cos t1, sin t1, cos t2, sin t2, dt1, dt2)`
    fn observation(&self) -> Vec<f64> {
        let [t1, t2, d1, d2] = self.state;
        vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), d1, d2]
    }

    fn reset(&mut self) -> Vec<f64> {
        for v in &mut self.state {
            *v = self.rng.random_range(-0.1..0.1);
        }
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        check_action(action, 3)?;
        self.state = Self::dynamics(self.state, action);
        self.steps += 1;
        let terminated = Self::is_terminal(self.state);
        let raw_reward = if terminated { 0.0 } else { -1.0 };
        // Raw rewards span [-1, 0]; the affine map and the goal bonus agree.
        let reward = match self.reward_map {
            RewardMap::GoalBonus => f64::from(u8::from(terminated)),
            RewardMap::Affine => raw_reward + 1.0,
        };
        Ok(StepOutcome {
            observation: self.observation(),
            raw_reward,
            reward,
            terminated,
            truncated: !terminated && self.steps >= EPISODE_CAP,
        })
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = env_rng(seed);
    }
}
