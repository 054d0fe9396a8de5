//! Execution-policy seam for the data-parallel inner loops.
//!
//! Per-item work is always single-threaded and independent, so the parallel
//! and sequential paths produce bit-identical output; only wall-clock time
//! differs. With the `parallel` feature (default) [`par_map`] fans out over
//! the rayon pool; without it both functions are plain sequential maps.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over items, in parallel when the `parallel` feature is enabled.
/// Output order always matches input order.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, R: Send, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T: Sync, R: Send, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Always-sequential map, kept public so benchmarks can compare both paths.
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Indexed variant of [`par_map`].
#[cfg(feature = "parallel")]
pub fn par_map_indexed<R: Send, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map_indexed<R: Send, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential() {
        let items: Vec<u64> = (0..5000).collect();
        let f = |x: &u64| x.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 3;
        assert_eq!(par_map(&items, f), seq_map(&items, f));
    }

    #[test]
    fn indexed_order_preserved() {
        let out = par_map_indexed(1000, |i| i * 2);
        assert!(out.iter().enumerate().all(|(i, &v)| v == i * 2));
    }
}
