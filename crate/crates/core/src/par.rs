//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature, [`ExecMode::Parallel`] dispatches to rayon.
//! Without it, every mode runs sequentially. Results are always returned in
//! input order so downstream reductions are bit-reproducible.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, collecting results in order.
pub fn map_slice<S, T, F>(mode: ExecMode, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Number of worker threads that [`ExecMode::Parallel`] would use.
pub fn worker_count(mode: ExecMode) -> usize {
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return rayon::current_num_threads();
    }
    let _ = mode;
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let seq = map_indexed(ExecMode::Sequential, 1000, |i| (i as f64).sqrt());
        let par = map_indexed(ExecMode::Parallel, 1000, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
        let items: Vec<u32> = (0..257).collect();
        let doubled = map_slice(ExecMode::Parallel, &items, |v| v * 2);
        assert_eq!(doubled[256], 512);
        assert!(worker_count(ExecMode::Sequential) == 1);
    }
}
