//! The kernelized Q-learning agent.
//!
//! Each step the agent acts greedily with respect to the clipped optimistic
//! value `clip(Q_hat(s, a) + beta * ||K_(s,a)||_W, 0, 1/(1-gamma))`, then
//! refits `Q_hat` by kernel ridge regression on the *whole* history, with
//! every target recomputed from the current optimistic values:
//!
//! ```text
//! y_tau = r_tau + gamma * max_a Q_tilde_t(s'_tau, a)     (r_tau if terminal)
//! ```
//!
//! Widths of all stored next-states are maintained with the rank-one
//! recurrence `G_{t+1}^2 = G_t^2 - u^2 / (1 + s)` rather than recomputed.
//! Next-states with identical normalized features share one table row.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::error::{KqlError, Result};
use crate::features::{FeatureVector, KernelSpec, StateBounds};
use crate::par::{self, Exec};
use crate::regressor::DualRegressor;

/// Absolute tolerance for the recurrence-vs-direct width comparison.
pub const WIDTH_CONSISTENCY_TOL: f64 = 1e-6;

/// Tie-breaking rule for argmax over actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Step budget `T`.
    pub steps: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub kernel: KernelSpec,
    pub tie_break: TieBreak,
    /// Compare recurrence widths with direct ones every this many steps.
    pub consistency_check_every: Option<usize>,
    pub exec: Exec,
}

impl AgentConfig {
    /// Defaults: `lambda = 1/(10T)`, `beta = sqrt(lambda)/(1-gamma)`.
    pub fn new(steps: usize, gamma: f64, kernel: KernelSpec) -> Self {
        let lambda = default_lambda(steps);
        Self {
            steps,
            gamma,
            lambda,
            beta: default_beta(lambda, gamma),
            kernel,
            tie_break: TieBreak::LowestIndex,
            consistency_check_every: if cfg!(debug_assertions) { Some(1) } else { Some(100) },
            exec: Exec::default(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_consistency_check(mut self, every: Option<usize>) -> Self {
        self.consistency_check_every = every;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Upper end of the admissible exploration coefficient.
    pub fn beta_max(&self) -> f64 {
        2.0 * (self.steps as f64 + self.lambda).sqrt() / (1.0 - self.gamma)
    }

    pub fn value_ceiling(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(KqlError::InvalidArgument("step budget must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(KqlError::InvalidArgument(format!("gamma = {} not in [0, 1)", self.gamma)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(KqlError::InvalidArgument(format!("lambda = {} must be > 0", self.lambda)));
        }
        if !(self.beta >= 0.0 && self.beta <= self.beta_max()) {
            return Err(KqlError::InvalidArgument(format!(
                "beta = {} outside [0, {}]",
                self.beta,
                self.beta_max()
            )));
        }
        if self.consistency_check_every == Some(0) {
            return Err(KqlError::InvalidArgument("consistency check interval must be positive".into()));
        }
        Ok(())
    }
}

pub fn default_lambda(steps: usize) -> f64 {
    1.0 / (10.0 * steps as f64)
}

pub fn default_beta(lambda: f64, gamma: f64) -> f64 {
    lambda.sqrt() / (1.0 - gamma)
}

/// One stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub tau: usize,
    pub feature: FeatureVector,
    /// Normalized reward in `[0, 1]`.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    /// Index of the next-state row in the UCB table; `None` when terminal.
    pub next_row: Option<usize>,
}

/// Cached per-state quantities for every action.
#[derive(Debug, Clone, PartialEq)]
struct QueryRow {
    features: Vec<FeatureVector>,
    self_kernel: Vec<f64>,
    /// `k(z_a)` against every anchor, one column per action.
    columns: Vec<Vec<f64>>,
    width_sq: Vec<f64>,
    q_hat: Vec<f64>,
}

/// Read-only view of one row of the width / optimistic-value table.
#[derive(Debug, Clone, Copy)]
pub struct UcbRow<'a> {
    agent: &'a KqlAgent,
    row: &'a QueryRow,
}

impl<'a> UcbRow<'a> {
    /// Recurrence-maintained widths, one per action.
    pub fn widths(&self) -> Vec<f64> {
        self.row.width_sq.iter().map(|w| w.sqrt()).collect()
    }

    pub fn q_hat(&self) -> &'a [f64] {
        &self.row.q_hat
    }

    pub fn q_tilde(&self) -> Vec<f64> {
        (0..self.row.q_hat.len())
            .map(|a| self.agent.clip(self.row.q_hat[a] + self.agent.config.beta * self.row.width_sq[a].sqrt()))
            .collect()
    }

    pub fn features(&self) -> &'a [FeatureVector] {
        &self.row.features
    }
}

/// Values the agent assigns to one action at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionValue {
    pub q_hat: f64,
    pub width: f64,
    pub q_tilde: f64,
}

/// Policy used once training is over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPolicy {
    /// argmax of the final ridge estimate.
    #[default]
    GreedyQHat,
    /// argmax of the clipped optimistic value.
    Ucb,
}

/// Running diagnostics gathered during training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub consistency_checks: usize,
    /// Largest `|recurrence width - direct width|` seen at a check.
    pub max_width_gap: f64,
    /// Smallest recurrence width seen at any row after any update.
    pub min_table_width: f64,
}

#[derive(Debug, Clone)]
pub struct KqlAgent {
    config: AgentConfig,
    bounds: StateBounds,
    regressor: DualRegressor,
    transitions: Vec<TransitionRecord>,
    rows: Vec<QueryRow>,
    row_index: HashMap<Vec<u64>, usize>,
    targets: Vec<f64>,
    alpha: Vec<f64>,
    diagnostics: Diagnostics,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(values: &[f64], _tie: TieBreak) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl KqlAgent {
    pub fn new(config: AgentConfig, bounds: StateBounds) -> Result<Self> {
        config.validate()?;
        if bounds.dim() != config.kernel.state_dim {
            return Err(KqlError::InvalidArgument(format!(
                "state bounds have {} dimensions, kernel expects {}",
                bounds.dim(),
                config.kernel.state_dim
            )));
        }
        let regressor = DualRegressor::new(config.kernel, config.lambda)?;
        Ok(Self {
            config,
            bounds,
            regressor,
            transitions: Vec::new(),
            rows: Vec::new(),
            row_index: HashMap::new(),
            targets: Vec::new(),
            alpha: Vec::new(),
            diagnostics: Diagnostics {
                min_table_width: f64::INFINITY,
                ..Default::default()
            },
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn bounds(&self) -> &StateBounds {
        &self.bounds
    }

    pub fn num_actions(&self) -> usize {
        self.config.kernel.num_actions
    }

    /// Number of transitions observed so far.
    pub fn steps_taken(&self) -> usize {
        self.transitions.len()
    }

    pub fn regressor(&self) -> &DualRegressor {
        &self.regressor
    }

    pub fn transitions(&self) -> &[TransitionRecord] {
        &self.transitions
    }

    /// Regression targets used for the current ridge estimate.
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn ucb_rows(&self) -> impl Iterator<Item = UcbRow<'_>> {
        self.rows.iter().map(move |row| UcbRow { agent: self, row })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn clip(&self, v: f64) -> f64 {
        v.clamp(0.0, self.config.value_ceiling())
    }

    fn feature(&self, normalized: &[f64], action: usize) -> Result<FeatureVector> {
        FeatureVector::from_normalized(normalized, action, self.num_actions())
    }

    fn features_for(&self, state: &[f64]) -> Result<Vec<FeatureVector>> {
        let normalized = self.bounds.normalize(state)?;
        (0..self.num_actions()).map(|a| self.feature(&normalized, a)).collect()
    }

    pub fn embed(&self, state: &[f64], action: usize) -> Result<FeatureVector> {
        if action >= self.num_actions() {
            return Err(KqlError::InvalidArgument(format!(
                "action {action} out of range for {} actions",
                self.num_actions()
            )));
        }
        self.feature(&self.bounds.normalize(state)?, action)
    }

    /// Current ridge estimate.
    pub fn q_hat(&self, state: &[f64], action: usize) -> Result<f64> {
        let z = self.embed(state, action)?;
        Ok(dot(&self.alpha, &self.regressor.kernel_column(z.values())))
    }

    /// Current width `||K_(s,a)||_W`, computed directly.
    pub fn ucb_width(&self, state: &[f64], action: usize) -> Result<f64> {
        self.regressor.width(&self.embed(state, action)?)
    }

    /// Current clipped optimistic value.
    pub fn q_tilde(&self, state: &[f64], action: usize) -> Result<f64> {
        Ok(self.action_value(&self.embed(state, action)?).q_tilde)
    }

    fn action_value(&self, z: &FeatureVector) -> ActionValue {
        let kz = self.regressor.kernel_column(z.values());
        let kzz = self.config.kernel.eval_slices(z.values(), z.values());
        let q_hat = dot(&self.alpha, &kz);
        let width = self.regressor.width_sq_from_column(kzz, &kz).sqrt();
        ActionValue {
            q_hat,
            width,
            q_tilde: self.clip(q_hat + self.config.beta * width),
        }
    }

    /// `(Q_hat, width, Q_tilde)` for every action at `state`.
    pub fn action_values(&self, state: &[f64]) -> Result<Vec<ActionValue>> {
        Ok(self.features_for(state)?.iter().map(|z| self.action_value(z)).collect())
    }

    /// Optimistic action; ties go to the lowest index.
    pub fn select_action(&self, state: &[f64]) -> Result<usize> {
        Ok(self.select_action_with_values(state)?.0)
    }

    /// Optimistic action together with the values it was chosen from.
    pub fn select_action_with_values(&self, state: &[f64]) -> Result<(usize, Vec<ActionValue>)> {
        let values = self.action_values(state)?;
        let q: Vec<f64> = values.iter().map(|v| v.q_tilde).collect();
        Ok((argmax(&q, self.config.tie_break), values))
    }

    /// argmax of `Q_hat`; ties go to the lowest index.
    pub fn greedy_action(&self, state: &[f64]) -> Result<usize> {
        let q = self
            .features_for(state)?
            .iter()
            .map(|z| dot(&self.alpha, &self.regressor.kernel_column(z.values())))
            .collect::<Vec<_>>();
        Ok(argmax(&q, self.config.tie_break))
    }

    /// Evaluation-time policy. Borrowing `self` immutably guarantees that no
    /// learning happens while it is in use.
    pub fn policy(&self, kind: EvalPolicy) -> impl Fn(&[f64]) -> Result<usize> + '_ {
        move |s| match kind {
            EvalPolicy::GreedyQHat => self.greedy_action(s),
            EvalPolicy::Ucb => self.select_action(s),
        }
    }

    fn row_key(normalized: &[f64]) -> Vec<u64> {
        normalized.iter().map(|v| v.to_bits()).collect()
    }

    fn build_row(&self, normalized: &[f64]) -> Result<QueryRow> {
        let features = (0..self.num_actions())
            .map(|a| self.feature(normalized, a))
            .collect::<Result<Vec<_>>>()?;
        let self_kernel: Vec<f64> = features
            .iter()
            .map(|z| self.config.kernel.eval_slices(z.values(), z.values()))
            .collect();
        let columns: Vec<Vec<f64>> = features
            .iter()
            .map(|z| self.regressor.kernel_column(z.values()))
            .collect();
        let width_sq = columns
            .iter()
            .zip(&self_kernel)
            .map(|(c, &kzz)| self.regressor.width_sq_from_column(kzz, c))
            .collect();
        let q_hat = columns.iter().map(|c| dot(&self.alpha, c)).collect();
        Ok(QueryRow {
            features,
            self_kernel,
            columns,
            width_sq,
            q_hat,
        })
    }

    /// Best optimistic value at each table row, under the current `Q_hat`
    /// and widths.
    fn row_values(&self) -> Vec<f64> {
        let beta = self.config.beta;
        par::map_range(self.config.exec, self.rows.len(), |i| {
            let row = &self.rows[i];
            row.q_hat
                .iter()
                .zip(&row.width_sq)
                .map(|(q, w)| self.clip(q + beta * w.sqrt()))
                .fold(f64::NEG_INFINITY, f64::max)
        })
    }

    /// Regression targets for all stored transitions under the current
    /// optimistic values.
    pub fn compute_targets(&self) -> Vec<f64> {
        let best = self.row_values();
        self.transitions
            .iter()
            .map(|tr| match tr.next_row {
                Some(row) if !tr.terminal => tr.reward + self.config.gamma * best[row],
                _ => tr.reward,
            })
            .collect()
    }

    /// Records one transition and refits.
    ///
    /// `reward` must already be normalized into `[0, 1]`.
    pub fn observe(
        &mut self,
        state: &[f64],
        action: usize,
        reward: f64,
        next_state: &[f64],
        terminal: bool,
    ) -> Result<()> {
        let tau = self.transitions.len();
        if tau >= self.config.steps {
            return Err(KqlError::BudgetExhausted {
                budget: self.config.steps,
            });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(KqlError::InvalidInput(format!("normalized reward {reward} outside [0, 1]")));
        }
        let x = self.embed(state, action)?;

        let next_row = if terminal {
            None
        } else {
            let normalized = self.bounds.normalize(next_state)?;
            let key = Self::row_key(&normalized);
            Some(match self.row_index.get(&key) {
                Some(&i) => i,
                None => {
                    let row = self.build_row(&normalized)?;
                    self.rows.push(row);
                    self.row_index.insert(key, self.rows.len() - 1);
                    self.rows.len() - 1
                }
            })
        };
        self.transitions.push(TransitionRecord {
            tau,
            feature: x.clone(),
            reward,
            next_state: next_state.to_vec(),
            terminal,
            next_row,
        });

        // Targets use the pre-update estimate and widths.
        let targets = self.compute_targets();

        let update = self.regressor.push(x.clone())?;
        let lambda = self.config.lambda;
        let kernel = self.config.kernel;
        let denom = 1.0 + update.self_norm_sq;
        par::for_each_mut(self.config.exec, &mut self.rows, |_, row| {
            for a in 0..row.features.len() {
                let kxz = kernel.eval_slices(x.values(), row.features[a].values());
                let u = update.cross(lambda, kxz, &row.columns[a]);
                row.width_sq[a] = (row.width_sq[a] - u * u / denom).max(0.0);
                row.columns[a].push(kxz);
            }
        });

        self.alpha = self.regressor.coefficients(&targets)?;
        self.targets = targets;
        let alpha = &self.alpha;
        par::for_each_mut(self.config.exec, &mut self.rows, |_, row| {
            for a in 0..row.columns.len() {
                row.q_hat[a] = dot(alpha, &row.columns[a]);
            }
        });

        let min_w = self
            .rows
            .iter()
            .flat_map(|r| r.width_sq.iter())
            .fold(f64::INFINITY, |m, &w| m.min(w.sqrt()));
        self.diagnostics.min_table_width = self.diagnostics.min_table_width.min(min_w);

        let t = self.transitions.len();
        if let Some(every) = self.config.consistency_check_every {
            if t.is_multiple_of(every) || t == self.config.steps {
                let gap = self.width_consistency_gap();
                self.diagnostics.consistency_checks += 1;
                self.diagnostics.max_width_gap = self.diagnostics.max_width_gap.max(gap);
            }
        }
        Ok(())
    }

    /// Largest absolute gap between recurrence-maintained widths and widths
    /// recomputed from the Cholesky factor.
    pub fn width_consistency_gap(&self) -> f64 {
        par::map_range(self.config.exec, self.rows.len(), |i| {
            let row = &self.rows[i];
            (0..row.features.len())
                .map(|a| {
                    let direct = self
                        .regressor
                        .width_sq_from_column(row.self_kernel[a], &row.columns[a])
                        .sqrt();
                    (direct - row.width_sq[a].sqrt()).abs()
                })
                .fold(0.0, f64::max)
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Squared RKHS norm of the current ridge estimate.
    pub fn q_hat_norm_sq(&self) -> Result<f64> {
        self.regressor.rkhs_norm_sq(&self.targets)
    }

    /// Digest of all learned state.
    pub fn state_digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.transitions.len().hash(&mut h);
        for v in self.alpha.iter().chain(&self.targets) {
            v.to_bits().hash(&mut h);
        }
        for row in &self.rows {
            for v in row.width_sq.iter().chain(&row.q_hat) {
                v.to_bits().hash(&mut h);
            }
        }
        for i in 0..self.regressor.len() {
            self.regressor.chol_entry(i, i).to_bits().hash(&mut h);
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_dim_agent(steps: usize, beta: f64, lambda: f64) -> KqlAgent {
        let kernel = KernelSpec::gaussian(1.0, 1, 1).unwrap();
        let cfg = AgentConfig::new(steps, 0.95, kernel)
            .with_lambda(lambda)
            .with_beta(beta)
            .with_exec(Exec::Sequential);
        KqlAgent::new(cfg, StateBounds::symmetric(&[1.0]).unwrap()).unwrap()
    }

    #[test]
    fn fresh_agent_values() {
        let kernel = KernelSpec::gaussian(0.3, 2, 3).unwrap();
        let cfg = AgentConfig::new(1000, 0.95, kernel).with_lambda(1e-4).with_beta(0.2);
        let agent = KqlAgent::new(cfg, StateBounds::symmetric(&[1.0, 1.0]).unwrap()).unwrap();
        let s = [0.4, -0.1];
        for a in 0..3 {
            assert_eq!(agent.q_hat(&s, a).unwrap(), 0.0);
            assert_abs_diff_eq!(agent.ucb_width(&s, a).unwrap(), 100.0, epsilon = 1e-9);
            assert_abs_diff_eq!(agent.q_tilde(&s, a).unwrap(), 20.0, epsilon = 1e-12);
        }
        assert_eq!(agent.select_action(&s).unwrap(), 0);
        assert_eq!(agent.greedy_action(&s).unwrap(), 0);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.3, 0.7, 0.5], TieBreak::LowestIndex), 1);
        assert_eq!(argmax(&[0.7, 0.9], TieBreak::LowestIndex), 1);
        assert_eq!(argmax(&[1.0, 1.0, 1.0], TieBreak::LowestIndex), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0], TieBreak::LowestIndex), 1);
    }

    #[test]
    fn optimistic_value_example() {
        // Q_hat = (0.5, 0.5), widths = (0.2, 0.4), beta = 1, ceiling 20.
        let q: Vec<f64> = [(0.5, 0.2), (0.5, 0.4)]
            .iter()
            .map(|&(q, w): &(f64, f64)| (q + 1.0 * w).clamp(0.0, 20.0))
            .collect();
        assert_abs_diff_eq!(q[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.9, epsilon = 1e-15);
        assert_eq!(argmax(&q, TieBreak::LowestIndex), 1);
    }

    #[test]
    fn terminal_target_is_reward() {
        let mut agent = one_dim_agent(10, 0.2, 0.01);
        agent.observe(&[0.0], 0, 1.0, &[0.5], true).unwrap();
        assert_eq!(agent.targets(), &[1.0]);
        agent.observe(&[0.5], 0, 0.25, &[0.2], false).unwrap();
        assert_eq!(agent.targets()[0], 1.0);
        assert!(agent.targets()[1] > 0.25);
    }

    #[test]
    fn budget_is_enforced() {
        let mut agent = one_dim_agent(2, 0.0, 0.1);
        agent.observe(&[0.0], 0, 0.0, &[0.0], false).unwrap();
        agent.observe(&[0.0], 0, 0.0, &[0.0], false).unwrap();
        assert_eq!(
            agent.observe(&[0.0], 0, 0.0, &[0.0], false),
            Err(KqlError::BudgetExhausted { budget: 2 })
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut agent = one_dim_agent(5, 0.0, 0.1);
        assert!(matches!(
            agent.observe(&[0.0], 0, 1.5, &[0.0], false),
            Err(KqlError::InvalidInput(_))
        ));
        assert!(matches!(
            agent.observe(&[0.0], 3, 0.5, &[0.0], false),
            Err(KqlError::InvalidArgument(_))
        ));
        let kernel = KernelSpec::linear(1, 1);
        let cfg = AgentConfig::new(10, 0.95, kernel).with_beta(1e6);
        assert!(KqlAgent::new(cfg, StateBounds::symmetric(&[1.0]).unwrap()).is_err());
        let cfg = AgentConfig::new(10, 1.0, kernel);
        assert!(KqlAgent::new(cfg, StateBounds::symmetric(&[1.0]).unwrap()).is_err());
    }

    /// Single state, single action, r = 1: the ridge estimate approaches the
    /// fixed point 1/(1-gamma) = 20 from below. The oracle is the scalar
    /// version of the same recursion, solved in closed form: with n identical
    /// anchors, `Q_hat = n y / (n + lambda)` and `width^2 = 1/(n + lambda)`.
    #[test]
    fn single_state_converges_to_fixed_point() {
        let steps = 400;
        let lambda = 1e-3;
        let beta = 0.1;
        let mut agent = one_dim_agent(steps, beta, lambda);
        let s = [0.3];
        let mut q_prev = 0.0;
        let (mut q_oracle, mut n) = (0.0f64, 0.0f64);
        for _ in 0..steps {
            agent.observe(&s, 0, 1.0, &s, false).unwrap();
            // scalar oracle
            let width = (1.0 / (n + lambda)).sqrt();
            let y = 1.0 + 0.95 * (q_oracle + beta * width).clamp(0.0, 20.0);
            n += 1.0;
            q_oracle = n * y / (n + lambda);

            let q = agent.q_hat(&s, 0).unwrap();
            assert!(q >= q_prev - 1e-9, "not monotone: {q_prev} -> {q}");
            assert_abs_diff_eq!(q, q_oracle, epsilon = 1e-6 * q_oracle.max(1.0));
            q_prev = q;
        }
        assert!(q_prev > 19.0 && q_prev < 20.0 + 1e-6, "final {q_prev}");
    }

    #[test]
    fn recurrence_tracks_direct_widths_and_shrinks() {
        let kernel = KernelSpec::gaussian(2.0, 2, 2).unwrap();
        let cfg = AgentConfig::new(120, 0.9, kernel)
            .with_lambda(1e-2)
            .with_consistency_check(Some(1));
        let mut agent = KqlAgent::new(cfg, StateBounds::symmetric(&[1.0, 1.0]).unwrap()).unwrap();
        let mut s = vec![0.0, 0.0];
        let floor = 1.0 / (2.0 * (120.0f64 + 1e-2).sqrt());
        for t in 0..120 {
            let before: Vec<Vec<f64>> = agent.ucb_rows().map(|r| r.widths()).collect();
            let a = agent.select_action(&s).unwrap();
            let next = vec![
                ((s[0] + if a == 0 { 0.13 } else { -0.07 }) * 1.7f64).sin(),
                (s[1] * 0.9 + 0.05 * t as f64).cos(),
            ];
            agent.observe(&s, a, 0.5 * (1.0 + next[0]), &next, t % 17 == 16).unwrap();
            for (old, new) in before.iter().zip(agent.ucb_rows()) {
                for (o, n) in old.iter().zip(new.widths()) {
                    assert!(n <= o + 1e-12);
                }
            }
            for row in agent.ucb_rows() {
                assert!(row.widths().iter().all(|&w| w >= floor));
                let ceiling = 1.0 / (1.0 - 0.9);
                assert!(row.q_tilde().iter().all(|&q| (0.0..=ceiling).contains(&q)));
            }
            s = next;
        }
        let d = agent.diagnostics();
        assert_eq!(d.consistency_checks, 120);
        assert!(d.max_width_gap <= WIDTH_CONSISTENCY_TOL, "gap {}", d.max_width_gap);
    }

    #[test]
    fn targets_are_reproducible() {
        let mut agent = one_dim_agent(50, 0.2, 1e-2);
        let mut s = 0.0f64;
        for _ in 0..30 {
            let a = agent.select_action(&[s]).unwrap();
            let next = (s + 0.11).sin();
            agent.observe(&[s], a, 0.5, &[next], false).unwrap();
            s = next;
        }
        let a = agent.compute_targets();
        let b = agent.compute_targets();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn beta_zero_greedy_matches_select() {
        let kernel = KernelSpec::gaussian(1.0, 1, 3).unwrap();
        let cfg = AgentConfig::new(40, 0.9, kernel).with_beta(0.0);
        let mut agent = KqlAgent::new(cfg, StateBounds::symmetric(&[1.0]).unwrap()).unwrap();
        let mut s = 0.1f64;
        for t in 0..40 {
            let a = agent.select_action(&[s]).unwrap();
            assert_eq!(a, agent.greedy_action(&[s]).unwrap());
            let next = (s * 3.0 + t as f64 * 0.1).sin();
            agent.observe(&[s], a, (a as f64) / 2.0, &[next], false).unwrap();
            s = next;
        }
    }

    #[test]
    fn q_hat_norm_respects_bound() {
        let mut agent = one_dim_agent(60, 0.3, 1e-2);
        let mut s = -0.5f64;
        for _ in 0..60 {
            let a = agent.select_action(&[s]).unwrap();
            let next = (s + 0.37).sin();
            agent.observe(&[s], a, 1.0, &[next], false).unwrap();
            let bound = 60.0 / (1e-2 * 0.05);
            assert!(agent.q_hat_norm_sq().unwrap().sqrt() <= bound);
            s = next;
        }
    }
}
