//! Order-preserving map over a slice, run on a rayon pool when the
//! `parallel` feature is enabled and sequentially otherwise.
//!
//! `workers == 1` always runs on the calling thread; `workers == 0` uses the
//! global rayon pool; any other width gets a dedicated pool.

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if workers == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    if workers == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(e) => {
            log::warn!("could not build a {workers}-thread pool ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// True when this build can actually run work on more than one thread.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
