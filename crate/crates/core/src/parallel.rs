//! Trial fan-out. With the `parallel` feature (default) independent trials
//! run on the rayon pool; without it the same loop runs sequentially.
//! Results come back indexed by trial, so aggregation order — and therefore
//! every report — is independent of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f(0), ..., f(trials - 1)` and collects the results in trial order.
#[cfg(feature = "parallel")]
pub fn run_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

/// Runs `f(0), ..., f(trials - 1)` and collects the results in trial order.
#[cfg(not(feature = "parallel"))]
pub fn run_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).map(f).collect()
}

/// Always-sequential variant, used by benchmarks as the baseline.
pub fn run_trials_seq<T, F>(trials: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..trials).map(f).collect()
}
