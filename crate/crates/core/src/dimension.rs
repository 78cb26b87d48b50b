//! Effective and pseudo dimension of kernel point sets, the closed-form
//! bounds used to pick `d_lambda` and `c_lambda`, the theory-side
//! exploration coefficient, and executable checks of the inequalities that
//! relate these quantities.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{KqlError, Result};
use crate::features::{FeatureVector, KernelKind, KernelSpec};
use crate::regressor::DualRegressor;

/// Gram matrix of a point set together with a regularization scale.
#[derive(Debug, Clone)]
pub struct DimQuery {
    gram: DMatrix<f64>,
    lambda: f64,
}

const PSD_TOL: f64 = 1e-8;

impl DimQuery {
    pub fn new(gram: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(KqlError::InvalidArgument(format!("lambda = {lambda} must be > 0")));
        }
        if !gram.is_square() {
            return Err(KqlError::InvalidInput(format!(
                "gram is {}x{}, not square",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let n = gram.nrows();
        for i in 0..n {
            for j in 0..i {
                if (gram[(i, j)] - gram[(j, i)]).abs() > PSD_TOL * (1.0 + gram[(i, j)].abs()) {
                    return Err(KqlError::InvalidInput(format!("gram not symmetric at ({i}, {j})")));
                }
            }
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(KqlError::InvalidInput("gram has non-finite entries".into()));
        }
        if n > 0 {
            let min = gram.clone().symmetric_eigenvalues().min();
            if min < -PSD_TOL * n as f64 {
                return Err(KqlError::InvalidInput(format!("gram not PSD: eigenvalue {min:e}")));
            }
        }
        Ok(Self { gram, lambda })
    }

    /// Gram matrix of `points` under `kernel`.
    pub fn from_points(kernel: &KernelSpec, points: &[FeatureVector], lambda: f64) -> Result<Self> {
        let n = points.len();
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = kernel.eval(&points[i], &points[j])?;
                gram[(i, j)] = k;
                gram[(j, i)] = k;
            }
        }
        Self::new(gram, lambda)
    }

    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Leading `n x n` block.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            gram: self.gram.view((0, 0), (n, n)).into_owned(),
            lambda: self.lambda,
        }
    }

    fn regularized_cholesky(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let n = self.len();
        (&self.gram + DMatrix::identity(n, n) * self.lambda)
            .cholesky()
            .ok_or_else(|| KqlError::InvalidInput("gram + lambda I is not positive definite".into()))
    }
}

/// `tr((G + lambda I)^-1 G)`.
pub fn effective_dimension(q: &DimQuery) -> Result<f64> {
    let n = q.len();
    if n == 0 {
        return Ok(0.0);
    }
    let chol = q.regularized_cholesky()?;
    let m = chol.solve(&q.gram);
    Ok(m.trace().clamp(0.0, n as f64))
}

/// Effective dimension of a multiset given its distinct points and their
/// multiplicities. The covariance `sum_j c_j K_j (x) K_j` shares its nonzero
/// spectrum with `C^1/2 G C^1/2`, so only the distinct points are factored.
pub fn effective_dimension_of_multiset(
    kernel: &KernelSpec,
    points: &[FeatureVector],
    counts: &[usize],
    lambda: f64,
) -> Result<f64> {
    if points.len() != counts.len() {
        return Err(KqlError::InvalidArgument("points and counts differ in length".into()));
    }
    let m = points.len();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let k = kernel.eval(&points[i], &points[j])? * ((counts[i] * counts[j]) as f64).sqrt();
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    effective_dimension(&DimQuery::new(gram, lambda)?)
}

/// `ln det(I + G / lambda)`, via the Cholesky factor of `I + G / lambda`.
pub fn pseudo_dimension(q: &DimQuery) -> Result<f64> {
    let n = q.len();
    if n == 0 {
        return Ok(0.0);
    }
    let m = DMatrix::identity(n, n) + &q.gram / q.lambda;
    let chol = m
        .cholesky()
        .ok_or_else(|| KqlError::InvalidInput("I + G/lambda is not positive definite".into()))?;
    let l = chol.l();
    Ok((0..n).map(|i| 2.0 * l[(i, i)].ln()).sum::<f64>().max(0.0))
}

/// `sum_i (G_ii - g_i^T (G + lambda I)^-1 g_i) / lambda`, the sum of squared
/// widths of every point against the full set. Equal to
/// [`effective_dimension`].
pub fn effective_dimension_dual_identity(q: &DimQuery) -> Result<f64> {
    let n = q.len();
    if n == 0 {
        return Ok(0.0);
    }
    let chol = q.regularized_cholesky()?;
    let mut total = 0.0;
    for i in 0..n {
        let g = q.gram.column(i).into_owned();
        let solved = chol.solve(&g);
        total += (q.gram[(i, i)] - g.dot(&solved)) / q.lambda;
    }
    Ok(total)
}

/// Outcome of a single inequality or identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for CheckRecord {
    /// `PASS|FAIL name lhs rhs`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.12e} {:.12e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.lhs,
            self.rhs
        )
    }
}

/// Prefix-monotonicity of a dimension along a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub effective: Vec<f64>,
    pub pseudo: Vec<f64>,
    /// First prefix length `n` where `d(n) < d(n-1) - slack`.
    pub first_effective_violation: Option<usize>,
    pub first_pseudo_violation: Option<usize>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.first_effective_violation.is_none() && self.first_pseudo_violation.is_none()
    }
}

pub const MONOTONE_SLACK: f64 = 1e-10;

/// Checks that both dimensions never decrease as points are appended.
pub fn check_monotonicity(q: &DimQuery) -> Result<MonotonicityReport> {
    let n = q.len();
    let mut effective = Vec::with_capacity(n + 1);
    let mut pseudo = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let p = q.prefix(m);
        effective.push(effective_dimension(&p)?);
        pseudo.push(pseudo_dimension(&p)?);
    }
    let first = |v: &[f64]| (1..v.len()).find(|&m| v[m] < v[m - 1] - MONOTONE_SLACK * (1.0 + v[m - 1].abs()));
    Ok(MonotonicityReport {
        first_effective_violation: first(&effective),
        first_pseudo_violation: first(&pseudo),
        effective,
        pseudo,
    })
}

/// Discounted sum of squared widths of each point against every earlier
/// prefix, compared with `(1/lambda) / (ln(1 + 1/lambda) (1-gamma)^2) * d_pse`.
///
/// The points must satisfy `K(x, x) <= 1`.
pub fn check_sum_of_ucb(kernel: &KernelSpec, points: &[FeatureVector], lambda: f64, gamma: f64) -> Result<CheckRecord> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(KqlError::InvalidArgument(format!("gamma = {gamma} not in [0, 1)")));
    }
    let n = points.len();
    // widths_sq[p][i]: squared width of x_i against the first p points.
    let mut reg = DualRegressor::new(*kernel, lambda)?;
    let mut widths_sq = Vec::with_capacity(n);
    for p in 0..n {
        let row: Vec<f64> = points
            .iter()
            .map(|z| {
                let kz = reg.kernel_column(z.values());
                reg.width_sq_from_column(kernel.eval_slices(z.values(), z.values()), &kz)
            })
            .collect();
        widths_sq.push(row);
        reg.push(points[p].clone())?;
    }
    let mut lhs = 0.0;
    for i in 0..n {
        for tau in 0..=i {
            lhs += gamma.powi((i - tau) as i32) * widths_sq[tau][i];
        }
    }
    let q = DimQuery::from_points(kernel, points, lambda)?;
    let rhs = (1.0 / lambda) / ((1.0 + 1.0 / lambda).ln() * (1.0 - gamma).powi(2)) * pseudo_dimension(&q)?;
    Ok(CheckRecord {
        name: format!("sum_of_ucb[gamma={gamma}]"),
        passed: lhs <= rhs * (1.0 + 1e-9) + 1e-12,
        lhs,
        rhs,
    })
}

/// Pseudo dimension against `ln(e (n + lambda) / lambda) * d_eff`.
pub fn check_pseudo_vs_effective(q: &DimQuery) -> Result<CheckRecord> {
    let n = q.len() as f64;
    let lhs = pseudo_dimension(q)?;
    let rhs = (std::f64::consts::E * (n + q.lambda) / q.lambda).ln() * effective_dimension(q)?;
    Ok(CheckRecord {
        name: "pseudo_vs_effective".into(),
        passed: lhs <= rhs * (1.0 + 1e-9) + 1e-12,
        lhs,
        rhs,
    })
}

/// Trace form against the dual-sum form of the effective dimension.
pub fn check_dual_identity(q: &DimQuery, rel_tol: f64) -> Result<CheckRecord> {
    let lhs = effective_dimension(q)?;
    let rhs = effective_dimension_dual_identity(q)?;
    Ok(CheckRecord {
        name: "effective_dimension_identity".into(),
        passed: (lhs - rhs).abs() <= rel_tol * lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE),
        lhs,
        rhs,
    })
}

/// Kernel family as seen by the closed-form bounds, on inputs in the unit
/// ball of `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelDescriptor {
    /// `K(x, y) = x^T y`.
    Linear { d: usize },
    /// `K(x, y) = exp(-eta ||x - y||^2)`.
    Gaussian { d: usize, eta: f64 },
}

impl KernelDescriptor {
    /// Descriptor of a shipped kernel, rescaled to the unit ball.
    ///
    /// The linear kernel is `phi(x)^T phi(y)` with
    /// `phi(x) = [x / sqrt(2(l+1)), 1/sqrt(2)]`, so `d = l + |A| + 1` and
    /// `||phi|| <= 1`. Feature vectors have squared norm at most `l + 1`, so
    /// dividing them by `sqrt(l + 1)` puts them in the unit ball and turns the
    /// bandwidth into `eta (l + 1)`.
    pub fn from_spec(spec: &KernelSpec) -> Self {
        match spec.kind {
            KernelKind::Linear => KernelDescriptor::Linear {
                d: spec.state_dim + spec.num_actions + 1,
            },
            KernelKind::Gaussian { eta } => KernelDescriptor::Gaussian {
                d: spec.state_dim + spec.num_actions,
                eta: eta * (spec.state_dim as f64 + 1.0),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            KernelDescriptor::Linear { d } | KernelDescriptor::Gaussian { d, .. } => d,
        }
    }
}

/// Closed-form upper bound on the effective dimension of any `n` points.
pub fn d_lambda_bound(kernel: KernelDescriptor, n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(KqlError::InvalidArgument(format!("lambda = {lambda} must be > 0")));
    }
    match kernel {
        KernelDescriptor::Linear { d } => Ok(d as f64),
        KernelDescriptor::Gaussian { d, eta } => {
            if lambda > n as f64 {
                return Err(KqlError::OutOfDomain(format!(
                    "Gaussian effective-dimension bound needs lambda <= n, got lambda = {lambda}, n = {n}"
                )));
            }
            let d_f = d as f64;
            Ok(3.0 * (6.0 + 41.0 / d_f * eta + 3.0 / d_f * (n as f64 / lambda).ln()).powi(d as i32))
        }
    }
}

/// Log covering-number bounds of the two identity embeddings at
/// granularities `eps_h` (functions) and `eps_hs` (operators), summed.
pub fn covering_log_bound(kernel: KernelDescriptor, eps_h: f64, eps_hs: f64) -> f64 {
    match kernel {
        KernelDescriptor::Linear { d } => {
            let d = d as f64;
            d * (1.0 + 2.0 / eps_h).ln() + d * d * (1.0 + 2.0 / eps_hs).ln()
        }
        KernelDescriptor::Gaussian { d, eta } => {
            let e2 = std::f64::consts::E.powi(2);
            let h = (2.0 * ((2.0 / eps_h).ln() + e2 * eta)).ceil().max(0.0);
            let hs = (2.0 * ((2.0 * 2f64.sqrt() / eps_hs).ln() + e2 * eta)).ceil().max(0.0);
            h.powi(d as i32) * (1.0 + 4.0 / eps_h).ln() + hs.powi(2 * d as i32) * (1.0 + 4.0 / eps_hs).ln()
        }
    }
}

/// Granularities `(lambda^2 (1-gamma) / (4 T^2), lambda^3 (1-gamma) / (32 (T + lambda)^3))`.
pub fn covering_granularities(steps: usize, lambda: f64, gamma: f64) -> (f64, f64) {
    let t = steps as f64;
    (
        lambda * lambda * (1.0 - gamma) / (4.0 * t * t),
        lambda.powi(3) * (1.0 - gamma) / (32.0 * (t + lambda).powi(3)),
    )
}

pub fn c_lambda_bound(kernel: KernelDescriptor, steps: usize, lambda: f64, gamma: f64) -> f64 {
    let (eps_h, eps_hs) = covering_granularities(steps, lambda, gamma);
    covering_log_bound(kernel, eps_h, eps_hs)
}

/// Parameters of the regret theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub steps: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Norm bound on the reward and transition embedding.
    pub rho: f64,
    /// Approximation error.
    pub epsilon: f64,
    /// Sub-Gaussian stochasticity level.
    pub sigma: f64,
    /// Failure probability.
    pub p: f64,
    pub d_lambda: f64,
    pub c_lambda: f64,
}

impl TheoryParams {
    /// Deterministic, exactly-representable setting (`epsilon = sigma = 0`,
    /// `rho = 1`) with `d_lambda`, `c_lambda` from the closed-form bounds.
    pub fn deterministic(kernel: KernelDescriptor, steps: usize, gamma: f64, lambda: f64) -> Result<Self> {
        let d_lambda = d_lambda_bound(kernel, steps, lambda)?.max(1.0);
        Ok(Self {
            steps,
            gamma,
            lambda,
            rho: 1.0,
            epsilon: 0.0,
            sigma: 0.0,
            p: 0.05,
            d_lambda,
            c_lambda: c_lambda_bound(kernel, steps, lambda, gamma),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KqlError::InvalidArgument(m));
        if !(self.lambda > 0.0) {
            return bad(format!("lambda = {} must be > 0", self.lambda));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} not in [0, 1)", self.gamma));
        }
        if !(self.rho >= 1.0 - self.gamma) {
            return bad(format!("rho = {} must be >= 1 - gamma", self.rho));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon = {} must be >= 0", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return bad(format!("sigma = {} not in [0, 1]", self.sigma));
        }
        if !(self.p > 0.0) {
            return bad(format!("p = {} must be > 0", self.p));
        }
        if !(self.d_lambda >= 1.0) {
            return bad(format!("d_lambda = {} must be >= 1", self.d_lambda));
        }
        if !(self.c_lambda >= 0.0) {
            return bad(format!("c_lambda = {} must be >= 0", self.c_lambda));
        }
        Ok(())
    }
}

/// Exploration coefficient prescribed by the regret theorem.
pub fn theoretical_beta(p: &TheoryParams) -> Result<f64> {
    p.validate()?;
    let t = p.steps as f64;
    let cap = 2.0 * (t + p.lambda).sqrt();
    let log_term = (std::f64::consts::E * (t + p.lambda) / p.lambda).ln();
    let second = 3.0 * p.rho * p.lambda.sqrt()
        + p.epsilon * (t * p.d_lambda).sqrt()
        + 2.0 * p.sigma * (p.d_lambda * log_term + (2.0 / p.p).ln() + p.c_lambda).sqrt();
    Ok(cap.min(second) / (1.0 - p.gamma))
}

/// Which displayed form of the regret bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundForm {
    /// General theorem, with `c_lambda` explicit.
    #[default]
    Theorem,
    /// Kernel-specific corollary form: the stochastic term is
    /// `sigma d_lambda sqrt(ln(e H (T + lambda) / (lambda p)) / lambda)`
    /// with `H = 1`.
    Corollary,
}

/// Regret bound with its hidden constant set to 1.
pub fn regret_bound(p: &TheoryParams, form: BoundForm) -> Result<f64> {
    p.validate()?;
    let t = p.steps as f64;
    let e = std::f64::consts::E;
    let log_t = (e * (t + p.lambda) / p.lambda).ln();
    let lead = (t * p.d_lambda * log_t / ((1.0 + 1.0 / p.lambda).ln() * (1.0 - p.gamma).powi(5))).sqrt();
    let log_tp = (e * (t + p.lambda) / (p.lambda * p.p)).ln();
    let stochastic = match form {
        BoundForm::Theorem => p.sigma * ((p.d_lambda * log_tp + p.c_lambda) / p.lambda).sqrt(),
        BoundForm::Corollary => p.sigma * p.d_lambda * (log_tp / p.lambda).sqrt(),
    };
    Ok(lead * (p.rho + p.epsilon * (p.d_lambda * t / p.lambda).sqrt() + stochastic))
}
