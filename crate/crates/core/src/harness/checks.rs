use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dimension::{
    check_dual_identity, check_monotonicity, check_pseudo_vs_effective, check_sum_of_ucb, d_lambda_bound,
    effective_dimension, effective_dimension_dual_identity, CheckRecord, DimQuery, KernelDescriptor,
    MONOTONE_SLACK,
};
use crate::error::Result;
use crate::features::{FeatureVector, KernelSpec};
use crate::par::{self, Exec};

/// Regularization scales cycled through by the check grid.
pub const CHECK_LAMBDAS: [f64; 4] = [1e-4, 1e-2, 1.0, 10.0];

const IDENTITY_REL_TOL: f64 = 1e-6;
const UCB_GAMMAS: [f64; 3] = [0.0, 0.5, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub state_dim: usize,
    pub num_actions: usize,
    /// Corrupts the first instance's trace-form effective dimension so the
    /// identity check must fail.
    pub inject_fault: bool,
    pub exec: Exec,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            state_dim: 3,
            num_actions: 2,
            inject_fault: false,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub records: Vec<CheckRecord>,
    pub instances: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.passed)
    }

    /// Number of records whose name starts with `prefix`.
    pub fn count(&self, prefix: &str) -> usize {
        self.records.iter().filter(|r| r.name.starts_with(prefix)).count()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, l: usize, a: usize) -> Vec<FeatureVector> {
    let mut points: Vec<FeatureVector> = Vec::with_capacity(n);
    for i in 0..n {
        // Occasional repeats exercise duplicate anchors.
        if i > 0 && rng.random_bool(0.15) {
            let j = rng.random_range(0..i);
            points.push(points[j].clone());
            continue;
        }
        let s: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let act = rng.random_range(0..a);
        points.push(FeatureVector::from_normalized(&s, act, a).expect("in-range features"));
    }
    points
}

fn tagged(mut r: CheckRecord, tag: &str) -> CheckRecord {
    r.name = format!("{}@{tag}", r.name);
    r
}

fn check_instance(n: usize, seed: u64, lambda: f64, opts: &CheckOptions, fault: bool) -> Result<Vec<CheckRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32));
    let (l, a) = (opts.state_dim, opts.num_actions);
    let eta = rng.random_range(0.05..3.0);
    let points = random_points(&mut rng, n, l, a);
    let mut out = Vec::new();
    for spec in [KernelSpec::linear(l, a), KernelSpec::gaussian(eta, l, a)?] {
        let kname = match spec.kind {
            crate::features::KernelKind::Linear => "linear".to_string(),
            crate::features::KernelKind::Gaussian { eta } => format!("rbf(eta={eta:.4})"),
        };
        let tag = format!("{kname},n={n},seed={seed},lambda={lambda:e}");
        let q = DimQuery::from_points(&spec, &points, lambda)?;

        let identity = if fault {
            let mut corrupt = q.gram().clone();
            for i in 0..corrupt.nrows() {
                corrupt[(i, i)] += 1.0;
            }
            let lhs = effective_dimension(&DimQuery::new(corrupt, lambda)?)?;
            let rhs = effective_dimension_dual_identity(&q)?;
            CheckRecord {
                name: "effective_dimension_identity".into(),
                passed: (lhs - rhs).abs() <= IDENTITY_REL_TOL * lhs.abs().max(rhs.abs()),
                lhs,
                rhs,
            }
        } else {
            check_dual_identity(&q, IDENTITY_REL_TOL)?
        };
        out.push(tagged(identity, &tag));

        let mono = check_monotonicity(&q)?;
        let min_step = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        out.push(tagged(
            CheckRecord {
                name: "effective_monotone".into(),
                passed: mono.first_effective_violation.is_none(),
                lhs: min_step(&mono.effective),
                rhs: -MONOTONE_SLACK,
            },
            &tag,
        ));
        out.push(tagged(
            CheckRecord {
                name: "pseudo_monotone".into(),
                passed: mono.first_pseudo_violation.is_none(),
                lhs: min_step(&mono.pseudo),
                rhs: -MONOTONE_SLACK,
            },
            &tag,
        ));
        out.push(tagged(check_pseudo_vs_effective(&q)?, &tag));
        for gamma in UCB_GAMMAS {
            out.push(tagged(check_sum_of_ucb(&spec, &points, lambda, gamma)?, &tag));
        }

        let d_eff = effective_dimension(&q)?;
        let descriptor = KernelDescriptor::from_spec(&spec);
        let (name, applicable) = match descriptor {
            KernelDescriptor::Linear { .. } => ("linear_dimension_bound", true),
            KernelDescriptor::Gaussian { .. } => ("gaussian_dimension_bound", lambda <= n as f64),
        };
        if applicable {
            let bound = d_lambda_bound(descriptor, n, lambda)?;
            out.push(tagged(
                CheckRecord {
                    name: name.into(),
                    passed: d_eff <= bound * (1.0 + 1e-12),
                    lhs: d_eff,
                    rhs: bound,
                },
                &tag,
            ));
        }
    }
    Ok(out)
}

/// Runs every dimension check on one random instance per `(size, seed)`.
/// An empty grid gives an empty report.
pub fn run_checks(sizes: &[usize], seeds: &[u64], opts: &CheckOptions) -> Result<CheckReport> {
    let jobs: Vec<(usize, usize, u64)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| seeds.iter().map(move |&s| (i, n, s)))
        .collect();
    let results = par::map_jobs(opts.exec, &jobs, |&(i, n, seed)| {
        let lambda = CHECK_LAMBDAS[(i + seed as usize) % CHECK_LAMBDAS.len()];
        let fault = opts.inject_fault && i == 0 && seeds.first() == Some(&seed);
        check_instance(n, seed, lambda, opts, fault)
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(CheckReport {
        records,
        instances: jobs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_gives_empty_report() {
        let r = run_checks(&[], &[1, 2], &CheckOptions::default()).unwrap();
        assert!(r.records.is_empty());
        assert!(r.passed());
        assert!(run_checks(&[5], &[], &CheckOptions::default()).unwrap().records.is_empty());
    }

    #[test]
    fn small_grid_passes() {
        let r = run_checks(&[1, 4, 12], &[0, 1, 2, 3], &CheckOptions::default()).unwrap();
        assert_eq!(r.instances, 12);
        assert!(r.passed(), "{}", r.failures().map(|f| f.to_string()).collect::<Vec<_>>().join("\n"));
        assert_eq!(r.count("effective_dimension_identity"), 24);
        assert_eq!(r.count("linear_dimension_bound"), 12);
    }

    #[test]
    fn injected_fault_is_reported() {
        let opts = CheckOptions {
            inject_fault: true,
            ..CheckOptions::default()
        };
        let r = run_checks(&[6], &[9], &opts).unwrap();
        assert!(!r.passed());
        assert!(r.failures().all(|f| f.name.starts_with("effective_dimension_identity")));
    }

    #[test]
    fn records_are_deterministic() {
        let a = run_checks(&[7], &[3, 4], &CheckOptions::default()).unwrap();
        let b = run_checks(
            &[7],
            &[3, 4],
            &CheckOptions {
                exec: Exec::Sequential,
                ..CheckOptions::default()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
