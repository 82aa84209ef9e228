//! Path executor. Results always come back in path-index order, so any
//! reduction over them is independent of the worker count.

/// Maps `f` over `0..n`, on a rayon pool unless `workers == Some(1)`.
#[cfg(feature = "parallel")]
pub fn map_paths<T, F>(n: u64, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers == Some(1) {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

/// Sequential fallback; `workers` is accepted and ignored.
#[cfg(not(feature = "parallel"))]
pub fn map_paths<T, F>(n: u64, _workers: Option<usize>, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n).map(f).collect()
}

/// Default worker count: the available cores.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
