//! Order-preserving parallel map over independent runs.

use rayon::prelude::*;

/// Maps `f` over `items`, keeping input order. `threads == 0` or a single
/// item runs inline on the caller's thread.
pub fn ordered_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if threads == 0 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}

/// Thread count from `FLOATSIM_THREADS`; unset or unparsable means 0.
pub fn threads_from_env() -> usize {
    std::env::var("FLOATSIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order() {
        let xs: Vec<u64> = (0..50).collect();
        let seq = ordered_map(&xs, 0, |x| x * x);
        let par = ordered_map(&xs, 4, |x| x * x);
        assert_eq!(seq, par);
    }
}
