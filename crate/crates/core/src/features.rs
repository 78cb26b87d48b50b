//! State-action embedding and the two shipped kernels.
//!
//! A state is first mapped per dimension into `[-1, 1]` using documented
//! bounds (values outside the bounds are clipped), then concatenated with a
//! one-hot encoding of the action. Both kernels are normalized so that the
//! self-kernel lies in `[1/4, 1]`, i.e. `||K_x|| in [1/2, 1]`.

use crate::error::{KqlError, Result};

/// Per-dimension state bounds used for normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBounds {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl StateBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() {
            return Err(KqlError::InvalidArgument(format!(
                "bounds length mismatch: {} vs {}",
                low.len(),
                high.len()
            )));
        }
        for (i, (&lo, &hi)) in low.iter().zip(&high).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(KqlError::InvalidArgument(format!(
                    "degenerate bounds in dimension {i}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { low, high })
    }

    /// Bounds `[-r, r]` in every dimension.
    pub fn symmetric(radius: &[f64]) -> Result<Self> {
        Self::new(radius.iter().map(|r| -r).collect(), radius.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    /// Clips each entry into its bounds and maps it affinely onto `[-1, 1]`.
    pub fn normalize(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.dim() {
            return Err(KqlError::InvalidArgument(format!(
                "state has {} entries, bounds have {}",
                state.len(),
                self.dim()
            )));
        }
        state
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&v, (&lo, &hi))| {
                if !v.is_finite() {
                    return Err(KqlError::InvalidInput(format!("non-finite state entry {v}")));
                }
                let c = v.clamp(lo, hi);
                Ok((2.0 * (c - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
            })
            .collect()
    }
}

/// Concatenation of a normalized state and a one-hot action.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    state_dim: usize,
}

impl FeatureVector {
    /// Builds a feature vector from an already-normalized state block.
    pub fn from_normalized(state: &[f64], action: usize, num_actions: usize) -> Result<Self> {
        if action >= num_actions {
            return Err(KqlError::InvalidArgument(format!(
                "action {action} out of range for {num_actions} actions"
            )));
        }
        if let Some(v) = state.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(KqlError::InvalidInput(format!(
                "normalized state entry {v} outside [-1, 1]"
            )));
        }
        let mut values = Vec::with_capacity(state.len() + num_actions);
        values.extend_from_slice(state);
        values.extend((0..num_actions).map(|a| if a == action { 1.0 } else { 0.0 }));
        Ok(Self {
            values,
            state_dim: state.len(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_actions(&self) -> usize {
        self.values.len() - self.state_dim
    }

    pub fn state_block(&self) -> &[f64] {
        &self.values[..self.state_dim]
    }

    pub fn action(&self) -> usize {
        self.values[self.state_dim..]
            .iter()
            .position(|&v| v == 1.0)
            .expect("one-hot action block")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Normalizes `state` against `bounds` and appends the one-hot `action`.
pub fn embed(
    state: &[f64],
    action: usize,
    bounds: &StateBounds,
    num_actions: usize,
) -> Result<FeatureVector> {
    if action >= num_actions {
        return Err(KqlError::InvalidArgument(format!(
            "action {action} out of range for {num_actions} actions"
        )));
    }
    let normalized = bounds.normalize(state)?;
    FeatureVector::from_normalized(&normalized, action, num_actions)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `<x, y> / (2(l + 1)) + 1/2`
    Linear,
    /// `exp(-eta ||x - y||^2)`
    Gaussian { eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub state_dim: usize,
    pub num_actions: usize,
}

impl KernelSpec {
    pub fn linear(state_dim: usize, num_actions: usize) -> Self {
        Self {
            kind: KernelKind::Linear,
            state_dim,
            num_actions,
        }
    }

    pub fn gaussian(eta: f64, state_dim: usize, num_actions: usize) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(KqlError::InvalidArgument(format!("bandwidth eta = {eta} must be >= 0")));
        }
        Ok(Self {
            kind: KernelKind::Gaussian { eta },
            state_dim,
            num_actions,
        })
    }

    pub fn feature_len(&self) -> usize {
        self.state_dim + self.num_actions
    }

    /// Checked kernel evaluation.
    pub fn eval(&self, x: &FeatureVector, y: &FeatureVector) -> Result<f64> {
        let n = self.feature_len();
        if x.len() != n || y.len() != n || x.state_dim() != self.state_dim || y.state_dim() != self.state_dim {
            return Err(KqlError::InvalidArgument(format!(
                "feature dimension mismatch: kernel expects {n}, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        Ok(self.eval_slices(x.values(), y.values()))
    }

    /// Unchecked evaluation on raw slices of equal length.
    #[inline]
    pub fn eval_slices(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self.kind {
            KernelKind::Linear => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                dot / (2.0 * (self.state_dim as f64 + 1.0)) + 0.5
            }
            KernelKind::Gaussian { eta } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-eta * d2).exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn embed_zero_state_one_hot() {
        let b = StateBounds::symmetric(&[1.0, 2.0]).unwrap();
        let x = embed(&[0.0, 0.0], 1, &b, 3).unwrap();
        assert_eq!(x.values(), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(x.action(), 1);
    }

    #[test]
    fn embed_upper_bound_is_all_ones() {
        let b = StateBounds::new(vec![-3.0, 0.0, 5.0], vec![1.0, 2.0, 9.0]).unwrap();
        let x = embed(&[1.0, 2.0, 9.0], 0, &b, 2).unwrap();
        assert_eq!(x.state_block(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn embed_mountain_car_state() {
        let b = StateBounds::new(vec![-1.2, -0.07], vec![0.6, 0.07]).unwrap();
        let x = embed(&[-0.5, 0.0], 2, &b, 3).unwrap();
        assert_abs_diff_eq!(x.values()[0], 2.0 * 0.7 / 1.8 - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.values()[0], -0.222_222_222_222, epsilon = 1e-9);
        assert_abs_diff_eq!(x.values()[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn embed_clips_out_of_range() {
        let b = StateBounds::symmetric(&[1.0]).unwrap();
        let x = embed(&[7.5], 0, &b, 1).unwrap();
        assert_eq!(x.state_block(), &[1.0]);
    }

    #[test]
    fn embed_errors() {
        let b = StateBounds::symmetric(&[1.0]).unwrap();
        assert!(matches!(embed(&[0.0], 3, &b, 3), Err(KqlError::InvalidArgument(_))));
        assert!(matches!(embed(&[f64::NAN], 0, &b, 3), Err(KqlError::InvalidInput(_))));
        assert!(matches!(
            embed(&[f64::INFINITY], 0, &b, 3),
            Err(KqlError::InvalidInput(_))
        ));
        assert!(StateBounds::new(vec![1.0], vec![1.0]).is_err());
        assert!(StateBounds::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn kernel_examples() {
        let b = StateBounds::symmetric(&[1.0, 1.0]).unwrap();
        let x0 = embed(&[0.0, 0.0], 0, &b, 3).unwrap();
        let x1 = embed(&[0.0, 0.0], 1, &b, 3).unwrap();
        let lin = KernelSpec::linear(2, 3);
        assert_abs_diff_eq!(lin.eval(&x0, &x0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);

        let rbf = KernelSpec::gaussian(0.02, 2, 3).unwrap();
        assert_eq!(rbf.eval(&x1, &x1).unwrap(), 1.0);
        assert_abs_diff_eq!(rbf.eval(&x0, &x1).unwrap(), 0.960_789_439_152_323, epsilon = 1e-12);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let b = StateBounds::symmetric(&[1.0, 1.0]).unwrap();
        let x = embed(&[0.0, 0.0], 0, &b, 3).unwrap();
        let k = KernelSpec::linear(3, 2);
        assert!(matches!(k.eval(&x, &x), Err(KqlError::InvalidArgument(_))));
    }

    fn feature(l: usize, a: usize) -> impl Strategy<Value = FeatureVector> {
        (prop::collection::vec(-1.0f64..=1.0, l), 0..a)
            .prop_map(move |(s, act)| FeatureVector::from_normalized(&s, act, a).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn kernels_symmetric_and_normalized(x in feature(4, 3), y in feature(4, 3), eta in 0.0f64..5.0) {
            let lin = KernelSpec::linear(4, 3);
            let rbf = KernelSpec::gaussian(eta, 4, 3).unwrap();
            prop_assert_eq!(lin.eval(&x, &y).unwrap(), lin.eval(&y, &x).unwrap());
            prop_assert_eq!(rbf.eval(&x, &y).unwrap(), rbf.eval(&y, &x).unwrap());
            let kxx = lin.eval(&x, &x).unwrap();
            prop_assert!((0.5..=1.0).contains(&kxx), "linear self-kernel {}", kxx);
            prop_assert_eq!(rbf.eval(&x, &x).unwrap(), 1.0);
        }

        #[test]
        fn gram_is_psd(points in prop::collection::vec(feature(3, 2), 20), eta in 0.0f64..3.0) {
            for spec in [KernelSpec::linear(3, 2), KernelSpec::gaussian(eta, 3, 2).unwrap()] {
                let g = nalgebra::DMatrix::from_fn(20, 20, |i, j| spec.eval(&points[i], &points[j]).unwrap());
                let min = g.symmetric_eigenvalues().min();
                prop_assert!(min >= -1e-8 * 20.0, "min eigenvalue {}", min);
            }
        }
    }
}
