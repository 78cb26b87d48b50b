//! Dual-form kernel ridge regression with an incrementally grown Cholesky
//! factor.
//!
//! The regularized inverse covariance `W = (sum_i K_i (x) K_i + lambda I)^-1`
//! is never formed. Every quantity is evaluated through the Gram matrix `G`
//! of the stored anchors and the lower-triangular factor `L` with
//! `L L^T = G + lambda I`:
//!
//! * `||K_z||_W^2 = (K(z, z) - k(z)^T (G + lambda I)^-1 k(z)) / lambda`
//! * `f(z) = y^T (G + lambda I)^-1 k(z)`
//!
//! where `k(z)[i] = K(x_i, z)`. Appending an anchor borders `L` with one new
//! row; the existing rows never change.

use crate::error::{KqlError, Result};
use crate::features::{FeatureVector, KernelSpec};

/// Packed lower-triangular storage, row `i` holding entries `0..=i`.
#[derive(Debug, Clone, Default, PartialEq)]
struct LowerPacked {
    data: Vec<f64>,
    n: usize,
}

impl LowerPacked {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n + 1);
        self.data.extend_from_slice(row);
        self.n += 1;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            self.row(i)[j]
        } else {
            self.row(j)[i]
        }
    }
}

/// Sherman-Morrison data produced by [`DualRegressor::push`], all evaluated
/// against the state *before* the push.
#[derive(Debug, Clone)]
pub struct PushUpdate {
    /// `(G + lambda I)^-1 k(x)`.
    pub solved_column: Vec<f64>,
    /// `||K_x||_W^2`, the `s` of the rank-one update.
    pub self_norm_sq: f64,
}

impl PushUpdate {
    /// `<W K_x, K_z>` given `K(x, z)` and the pre-push column `k(z)`.
    pub fn cross(&self, lambda: f64, kxz: f64, kz_before: &[f64]) -> f64 {
        debug_assert_eq!(kz_before.len(), self.solved_column.len());
        let dot: f64 = self.solved_column.iter().zip(kz_before).map(|(a, b)| a * b).sum();
        (kxz - dot) / lambda
    }
}

/// Kernel ridge state over an ordered list of anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRegressor {
    kernel: KernelSpec,
    lambda: f64,
    anchors: Vec<FeatureVector>,
    gram: LowerPacked,
    chol: LowerPacked,
}

impl DualRegressor {
    pub fn new(kernel: KernelSpec, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(KqlError::InvalidArgument(format!("lambda = {lambda} must be > 0")));
        }
        Ok(Self {
            kernel,
            lambda,
            anchors: Vec::new(),
            gram: LowerPacked::default(),
            chol: LowerPacked::default(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn anchors(&self) -> &[FeatureVector] {
        &self.anchors
    }

    pub fn gram_entry(&self, i: usize, j: usize) -> f64 {
        self.gram.get(i, j)
    }

    pub fn chol_entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.chol.row(i)[j]
        }
    }

    /// Dense copy of the Gram matrix, row-major.
    pub fn gram_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.gram.get(i, j)).collect()).collect()
    }

    /// `k(z)`: kernel values of `z` against every anchor.
    pub fn kernel_column(&self, z: &[f64]) -> Vec<f64> {
        self.anchors
            .iter()
            .map(|x| self.kernel.eval_slices(x.values(), z))
            .collect()
    }

    /// `L^-1 b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len().min(self.len());
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            let row = self.chol.row(i);
            let dot: f64 = row[..i].iter().zip(&x).map(|(l, v)| l * v).sum();
            x.push((b[i] - dot) / row[i]);
        }
        x
    }

    /// `L^-T b`.
    pub fn backward_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let row = self.chol.row(i);
            x[i] /= row[i];
            let xi = x[i];
            for (xj, l) in x[..i].iter_mut().zip(&row[..i]) {
                *xj -= l * xi;
            }
        }
        x
    }

    /// `(G + lambda I)^-1 b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len(), "right-hand side")?;
        Ok(self.backward_solve(&self.forward_solve(b)))
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.len() {
            return Err(KqlError::InvalidArgument(format!(
                "{what} has length {len}, expected {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Squared width from a precomputed self-kernel and column.
    pub fn width_sq_from_column(&self, kzz: f64, kz: &[f64]) -> f64 {
        let w = self.forward_solve(kz);
        let quad: f64 = w.iter().map(|v| v * v).sum();
        ((kzz - quad) / self.lambda).max(0.0)
    }

    /// `||K_z||_W`.
    pub fn width(&self, z: &FeatureVector) -> Result<f64> {
        self.check_feature(z)?;
        let kz = self.kernel_column(z.values());
        let kzz = self.kernel.eval_slices(z.values(), z.values());
        let w = self.width_sq_from_column(kzz, &kz).sqrt();
        if !w.is_finite() {
            return Err(KqlError::Numerical(format!(
                "non-finite width {w} with {} anchors, lambda = {}",
                self.len(),
                self.lambda
            )));
        }
        Ok(w)
    }

    fn check_feature(&self, z: &FeatureVector) -> Result<()> {
        if z.len() != self.kernel.feature_len() || z.state_dim() != self.kernel.state_dim {
            return Err(KqlError::InvalidArgument(format!(
                "feature of length {} does not match kernel input length {}",
                z.len(),
                self.kernel.feature_len()
            )));
        }
        Ok(())
    }

    /// Appends an anchor, bordering the Cholesky factor with one row.
    pub fn push(&mut self, x: FeatureVector) -> Result<PushUpdate> {
        self.check_feature(&x)?;
        let kx = self.kernel_column(x.values());
        let kxx = self.kernel.eval_slices(x.values(), x.values());
        let border = self.forward_solve(&kx);
        let quad: f64 = border.iter().map(|v| v * v).sum();
        let pivot_sq = kxx + self.lambda - quad;
        if !(pivot_sq.is_finite() && pivot_sq > 0.0) {
            return Err(KqlError::Numerical(format!(
                "Cholesky pivot {pivot_sq:e} not positive at anchor {} (k(x,x) = {kxx}, lambda = {}, |L^-1 k|^2 = {quad})",
                self.len(),
                self.lambda
            )));
        }
        let solved_column = self.backward_solve(&border);
        let self_norm_sq = ((kxx - quad) / self.lambda).max(0.0);

        let mut chol_row = border;
        chol_row.push(pivot_sq.sqrt());
        self.chol.push_row(&chol_row);

        let mut gram_row = kx;
        gram_row.push(kxx);
        self.gram.push_row(&gram_row);

        self.anchors.push(x);
        Ok(PushUpdate {
            solved_column,
            self_norm_sq,
        })
    }

    /// Dual coefficients `(G + lambda I)^-1 y`.
    pub fn coefficients(&self, targets: &[f64]) -> Result<Vec<f64>> {
        self.solve(targets)
    }

    /// `y^T (G + lambda I)^-1 k(z)`.
    pub fn ridge_predict(&self, targets: &[f64], z: &FeatureVector) -> Result<f64> {
        self.check_feature(z)?;
        let alpha = self.coefficients(targets)?;
        let kz = self.kernel_column(z.values());
        Ok(alpha.iter().zip(&kz).map(|(a, k)| a * k).sum())
    }

    /// `alpha^T G alpha` with `alpha = (G + lambda I)^-1 y`.
    pub fn rkhs_norm_sq(&self, targets: &[f64]) -> Result<f64> {
        let alpha = self.coefficients(targets)?;
        let n = self.len();
        let mut total = 0.0;
        for i in 0..n {
            let row = self.gram.row(i);
            let off: f64 = row[..i].iter().zip(&alpha[..i]).map(|(g, a)| g * a).sum();
            total += alpha[i] * (row[i] * alpha[i] + 2.0 * off);
        }
        Ok(total.max(0.0))
    }

    /// Relative Frobenius error of `L L^T` against `G + lambda I`.
    pub fn factorization_error(&self) -> f64 {
        let n = self.len();
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..n {
            let ri = self.chol.row(i);
            for j in 0..=i {
                let rj = self.chol.row(j);
                let llt: f64 = ri[..=j].iter().zip(rj).map(|(a, b)| a * b).sum();
                let target = self.gram.get(i, j) + if i == j { self.lambda } else { 0.0 };
                let w = if i == j { 1.0 } else { 2.0 };
                err += w * (llt - target).powi(2);
                norm += w * target * target;
            }
        }
        if norm == 0.0 {
            0.0
        } else {
            (err / norm).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::StateBounds;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_feature(rng: &mut ChaCha8Rng, l: usize, a: usize) -> FeatureVector {
        let s: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..=1.0)).collect();
        FeatureVector::from_normalized(&s, rng.random_range(0..a), a).unwrap()
    }

    fn dense_chol(reg: &DualRegressor) -> DMatrix<f64> {
        let n = reg.len();
        let m = DMatrix::from_fn(n, n, |i, j| {
            reg.kernel().eval(&reg.anchors()[i], &reg.anchors()[j]).unwrap()
                + if i == j { reg.lambda() } else { 0.0 }
        });
        m.cholesky().unwrap().l()
    }

    #[test]
    fn empty_width_is_inverse_sqrt_lambda() {
        let spec = KernelSpec::gaussian(1.0, 2, 2).unwrap();
        let reg = DualRegressor::new(spec, 1e-4).unwrap();
        let z = FeatureVector::from_normalized(&[0.3, -0.2], 1, 2).unwrap();
        assert_abs_diff_eq!(reg.width(&z).unwrap(), 100.0, epsilon = 1e-9);
        assert_eq!(reg.ridge_predict(&[], &z).unwrap(), 0.0);
        assert_eq!(reg.rkhs_norm_sq(&[]).unwrap(), 0.0);
    }

    #[test]
    fn single_anchor_examples() {
        let spec = KernelSpec::gaussian(0.5, 2, 2).unwrap();
        let mut reg = DualRegressor::new(spec, 1.0).unwrap();
        let z = FeatureVector::from_normalized(&[0.1, 0.4], 0, 2).unwrap();
        let up = reg.push(z.clone()).unwrap();
        assert_abs_diff_eq!(up.self_norm_sq, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(reg.chol_entry(0, 0), 2.0f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(reg.width(&z).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(reg.ridge_predict(&[3.0], &z).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(reg.rkhs_norm_sq(&[1.0]).unwrap(), 0.25, epsilon = 1e-12);
        assert_eq!(reg.rkhs_norm_sq(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn push_onto_empty() {
        let spec = KernelSpec::linear(2, 3);
        let mut reg = DualRegressor::new(spec, 0.25).unwrap();
        let x = FeatureVector::from_normalized(&[0.5, -1.0], 2, 3).unwrap();
        let kxx = spec.eval(&x, &x).unwrap();
        reg.push(x).unwrap();
        assert_abs_diff_eq!(reg.chol_entry(0, 0), (kxx + 0.25).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn two_pushes_match_dense_cholesky() {
        // Linear kernel with l = 2: zero states with distinct actions give
        // K(x1, x2) = 0/(2*3) + 1/2 = 0.5.
        let spec = KernelSpec::linear(2, 2);
        let lambda = 0.1;
        let mut reg = DualRegressor::new(spec, lambda).unwrap();
        let x1 = FeatureVector::from_normalized(&[0.0, 0.0], 0, 2).unwrap();
        let x2 = FeatureVector::from_normalized(&[0.0, 0.0], 1, 2).unwrap();
        assert_eq!(spec.eval(&x1, &x2).unwrap(), 0.5);
        let k11 = spec.eval(&x1, &x1).unwrap();
        let k22 = spec.eval(&x2, &x2).unwrap();
        reg.push(x1).unwrap();
        reg.push(x2).unwrap();
        let dense = DMatrix::from_row_slice(2, 2, &[k11 + lambda, 0.5, 0.5, k22 + lambda])
            .cholesky()
            .unwrap()
            .l();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(reg.chol_entry(i, j), dense[(i, j)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn incremental_matches_dense_after_many_pushes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = KernelSpec::gaussian(0.7, 3, 2).unwrap();
        let mut reg = DualRegressor::new(spec, 1e-2).unwrap();
        for _ in 0..100 {
            reg.push(random_feature(&mut rng, 3, 2)).unwrap();
        }
        let dense = dense_chol(&reg);
        let mut err = 0.0;
        for i in 0..100 {
            for j in 0..=i {
                err += (reg.chol_entry(i, j) - dense[(i, j)]).powi(2);
            }
        }
        assert!(err.sqrt() / dense.norm() <= 1e-8);
        assert!(reg.factorization_error() <= 1e-8);
    }

    #[test]
    fn width_matches_dense_oracle_and_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = KernelSpec::gaussian(2.0, 2, 3).unwrap();
        let lambda = 0.05;
        let mut reg = DualRegressor::new(spec, lambda).unwrap();
        let probes: Vec<_> = (0..100).map(|_| random_feature(&mut rng, 2, 3)).collect();
        for step in 0..25 {
            let before: Vec<f64> = probes.iter().map(|z| reg.width(z).unwrap()).collect();
            reg.push(random_feature(&mut rng, 2, 3)).unwrap();
            for (z, b) in probes.iter().zip(&before) {
                let w = reg.width(z).unwrap();
                assert!(w <= b + 1e-12, "width grew at step {step}: {b} -> {w}");
            }
        }
        // dense oracle: W-norm via explicit inverse of (G + lambda I)
        let n = reg.len();
        let m = DMatrix::from_fn(n, n, |i, j| {
            spec.eval(&reg.anchors()[i], &reg.anchors()[j]).unwrap() + if i == j { lambda } else { 0.0 }
        });
        let inv = m.try_inverse().unwrap();
        for z in &probes {
            let kz = DVector::from_iterator(n, reg.anchors().iter().map(|x| spec.eval(x, z).unwrap()));
            let expect = ((1.0 - (kz.transpose() * &inv * &kz)[0]) / lambda).sqrt();
            assert_abs_diff_eq!(reg.width(z).unwrap(), expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn cross_term_matches_sherman_morrison() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = KernelSpec::gaussian(1.0, 2, 2).unwrap();
        let lambda = 0.1;
        let mut reg = DualRegressor::new(spec, lambda).unwrap();
        for _ in 0..10 {
            reg.push(random_feature(&mut rng, 2, 2)).unwrap();
        }
        let z = random_feature(&mut rng, 2, 2);
        let x = random_feature(&mut rng, 2, 2);
        let before = reg.width(&z).unwrap();
        let kz = reg.kernel_column(z.values());
        let kxz = spec.eval(&x, &z).unwrap();
        let up = reg.push(x).unwrap();
        let u = up.cross(lambda, kxz, &kz);
        let recurrence = (before * before - u * u / (1.0 + up.self_norm_sq)).max(0.0).sqrt();
        assert_abs_diff_eq!(recurrence, reg.width(&z).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn width_sandwich_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = KernelSpec::linear(3, 2);
        let lambda = 1e-3;
        let horizon = 60.0;
        let mut reg = DualRegressor::new(spec, lambda).unwrap();
        for _ in 0..60 {
            reg.push(random_feature(&mut rng, 3, 2)).unwrap();
            let z = random_feature(&mut rng, 3, 2);
            let norm = spec.eval(&z, &z).unwrap().sqrt();
            let w = reg.width(&z).unwrap();
            assert!(w >= norm / (lambda + horizon).sqrt() - 1e-12);
            assert!(w <= norm / lambda.sqrt() + 1e-12);
            assert!(w >= 1.0 / (2.0 * (horizon + lambda).sqrt()));
        }
    }

    #[test]
    fn argument_errors() {
        let spec = KernelSpec::linear(1, 2);
        assert!(DualRegressor::new(spec, 0.0).is_err());
        assert!(DualRegressor::new(spec, f64::NAN).is_err());
        let mut reg = DualRegressor::new(spec, 1.0).unwrap();
        let b = StateBounds::symmetric(&[1.0]).unwrap();
        reg.push(crate::features::embed(&[0.2], 1, &b, 2).unwrap()).unwrap();
        let z = crate::features::embed(&[0.2], 0, &b, 2).unwrap();
        assert!(matches!(reg.ridge_predict(&[1.0, 2.0], &z), Err(KqlError::InvalidArgument(_))));
        let wrong = FeatureVector::from_normalized(&[0.0, 0.0], 0, 2).unwrap();
        assert!(reg.width(&wrong).is_err());
    }
}
