#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kql::{DualRegressor, FeatureVector, KernelSpec};

pub const STATE_DIM: usize = 3;
pub const NUM_ACTIONS: usize = 2;

/// Explicit feature map of the normalized linear kernel.
pub fn linear_features(x: &FeatureVector) -> DVector<f64> {
    let l = x.state_dim() as f64;
    let mut v: Vec<f64> = x.values().iter().map(|a| a / (2.0 * (l + 1.0)).sqrt()).collect();
    v.push(0.5f64.sqrt());
    DVector::from_vec(v)
}

/// Largest disagreement between the dual regressor and a primal ridge
/// regression on explicit features.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrimalGap {
    pub prediction: f64,
    pub width: f64,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Compares `histories` random histories of length at most 50, each queried
/// at every anchor and at fresh points.
pub fn dual_primal_gap(histories: usize, lambda: f64, seed: u64) -> PrimalGap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = KernelSpec::linear(STATE_DIM, NUM_ACTIONS);
    let random_feature = |rng: &mut ChaCha8Rng| {
        let s: Vec<f64> = (0..STATE_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect();
        FeatureVector::from_normalized(&s, rng.random_range(0..NUM_ACTIONS), NUM_ACTIONS).unwrap()
    };
    let mut gap = PrimalGap::default();
    for _ in 0..histories {
        let t = rng.random_range(1..=50);
        let mut reg = DualRegressor::new(spec, lambda).unwrap();
        let mut xs = Vec::with_capacity(t);
        for _ in 0..t {
            let x = random_feature(&mut rng);
            reg.push(x.clone()).unwrap();
            xs.push(x);
        }
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..20.0)).collect();

        let d = STATE_DIM + NUM_ACTIONS + 1;
        let phi = DMatrix::from_fn(t, d, |i, j| linear_features(&xs[i])[j]);
        let w = phi.transpose() * &phi + DMatrix::identity(d, d) * lambda;
        let w_inv = w.clone().try_inverse().unwrap();
        let theta = w.lu().solve(&(phi.transpose() * DVector::from_vec(y.clone()))).unwrap();

        let queries: Vec<FeatureVector> = xs.iter().cloned().chain((0..10).map(|_| random_feature(&mut rng))).collect();
        for z in &queries {
            let f = linear_features(z);
            let q_primal = f.dot(&theta);
            let w_primal = f.dot(&(&w_inv * &f)).max(0.0).sqrt();
            let q_dual = reg.ridge_predict(&y, z).unwrap();
            let w_dual = reg.width(z).unwrap();
            gap.prediction = gap.prediction.max(rel_gap(q_dual, q_primal));
            gap.width = gap.width.max(rel_gap(w_dual, w_primal));
        }
    }
    gap
}
