//! Index-ordered mapping that fans out over rayon when the `parallel`
//! feature is enabled and the caller asks for it.

/// `(0..n).map(f)` collected in index order, whichever way it runs.
pub fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Whether [`map_indexed`] can actually run in parallel in this build.
pub const PARALLEL_AVAILABLE: bool = cfg!(feature = "parallel");
