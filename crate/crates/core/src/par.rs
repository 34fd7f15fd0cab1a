//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) these dispatch to rayon; without
//! it they run sequentially. Results are always returned in input order, so
//! callers that own one RNG per item stay deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "VMG_THREADS";

/// Maps `f` over `items`, in parallel when the feature is enabled.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maps `f` over `0..n`, in parallel when the feature is enabled.
pub fn par_range_map<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Always-sequential counterpart of [`par_map`]; used by benches and tests.
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Worker count from `VMG_THREADS`, falling back to `default`.
pub fn threads_from_env(default: Option<usize>) -> Option<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).or(default),
        Err(_) => default,
    }
}

/// Runs `op` on a pool with `threads` workers (the global pool when `None`).
pub fn with_threads<R, F>(threads: Option<usize>, op: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                return pool.install(op);
            }
        }
        op()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_and_seq_agree_in_order() {
        let xs: Vec<u64> = (0..100).collect();
        let a = par_map(&xs, |x| x * x + 1);
        let b = seq_map(&xs, |x| x * x + 1);
        assert_eq!(a, b);
        assert_eq!(par_range_map(5, |i| i * 2), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn with_threads_runs_closure() {
        assert_eq!(with_threads(Some(2), || 41 + 1), 42);
        assert_eq!(with_threads(None, || 7), 7);
    }
}
