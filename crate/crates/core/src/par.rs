//! Indexed data parallelism with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over rayon's pool;
//! without it everything runs in order on the calling thread. Results are
//! always returned in index order, so output never depends on scheduling.

/// Map `f` over `0..count`, preserving order.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(count, f)
    }
}

/// Sequential reference path; always available for comparison.
pub fn map_indexed_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Configure the global pool from `CPPERTURB_THREADS` (no-op if unset or sequential).
///
/// Returns the thread count in effect.
pub fn init_threads_from_env() -> usize {
    let requested = std::env::var("CPPERTURB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0);
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = requested {
            // a second call (or a pool already built by a test harness) is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(100, |i| i * i);
        let b = map_indexed_sequential(100, |i| i * i);
        assert_eq!(a, b);
    }
}
