use std::collections::BTreeMap;
use std::fmt;

use crate::envs::EnvKind;
use crate::error::{KqlError, Result};

use super::run::{KernelChoice, RunLog};

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(KqlError::InvalidInput("no values to summarize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub mean: f64,
    pub std: f64,
    /// Number of seeds.
    pub runs: usize,
}

/// Kernel-by-environment grid of evaluation returns.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    cells: BTreeMap<(usize, usize), CellStats>,
}

const ENV_ORDER: [EnvKind; 4] = [EnvKind::MountainCar, EnvKind::Pendulum, EnvKind::Acrobot, EnvKind::CartPole];
const KERNEL_ORDER: [KernelChoice; 2] = [KernelChoice::Linear, KernelChoice::Rbf];

fn env_col(e: EnvKind) -> usize {
    ENV_ORDER.iter().position(|&x| x == e).expect("listed environment")
}

fn kernel_row(k: KernelChoice) -> usize {
    KERNEL_ORDER.iter().position(|&x| x == k).expect("listed kernel")
}

impl SummaryTable {
    pub fn get(&self, env: EnvKind, kernel: KernelChoice) -> Option<CellStats> {
        self.cells.get(&(kernel_row(kernel), env_col(env))).copied()
    }
}

/// Groups runs by environment and kernel. Each cell is the mean and
/// population standard deviation, across seeds, of the per-seed mean
/// evaluation return.
pub fn summarize(logs: &[RunLog]) -> Result<SummaryTable> {
    if logs.is_empty() {
        return Err(KqlError::InvalidInput("no runs to summarize".into()));
    }
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for log in logs {
        let key = (kernel_row(log.config.kernel), env_col(log.config.env));
        groups.entry(key).or_default().push(log.eval_mean());
    }
    let mut cells = BTreeMap::new();
    for (key, means) in groups {
        let (mean, std) = mean_std(&means)?;
        cells.insert(
            key,
            CellStats {
                mean,
                std,
                runs: means.len(),
            },
        );
    }
    Ok(SummaryTable { cells })
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# mean ± population std across seeds of the per-seed mean evaluation return"
        )?;
        write!(f, "{:<22}", "kernel")?;
        for e in ENV_ORDER {
            write!(f, " | {:>20}", e.as_str())?;
        }
        writeln!(f)?;
        for (r, k) in KERNEL_ORDER.iter().enumerate() {
            let label = match k {
                KernelChoice::Linear => "Linear Kernel",
                KernelChoice::Rbf => "Gaussian RBF Kernel",
            };
            write!(f, "{label:<22}")?;
            for c in 0..ENV_ORDER.len() {
                let cell = match self.cells.get(&(r, c)) {
                    Some(s) => format!("{:.2} ± {:.2}", s.mean, s.std),
                    None => "-".to_string(),
                };
                write!(f, " | {cell:>20}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
