//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the helpers dispatch to rayon when asked to;
//! without it every call runs on the current thread. Results are always
//! returned in input order, and each element is computed by the same
//! sequential arithmetic, so output is bit-identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether parallel execution is compiled in.
pub const PARALLEL_AVAILABLE: bool = cfg!(feature = "parallel");

/// Execution strategy for batch loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        PARALLEL_AVAILABLE && self == Exec::Parallel
    }
}

// Below this many items the rayon overhead dominates.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_LEN: usize = 64;

/// `f` applied to `0..n`, collected in order.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && n >= MIN_PARALLEL_LEN {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Mutates every element of `items` with its index.
pub fn for_each_mut<T, F>(exec: Exec, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= MIN_PARALLEL_LEN {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    let _ = exec;
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Maps a slice of independent jobs (seeds, configs) to results, in order.
/// No minimum length: every job is assumed to be expensive.
pub fn map_jobs<J, T, F>(exec: Exec, jobs: &[J], f: F) -> Vec<T>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return jobs.par_iter().map(f).collect();
    }
    let _ = exec;
    jobs.iter().map(f).collect()
}
