//! Order-preserving data-parallel map.
//!
//! With the `parallel` feature (default) work runs on a rayon pool; without
//! it, or with [`Execution::Sequential`], everything runs on the calling
//! thread. Results always come back in index order, so reductions over them
//! are independent of scheduling.

/// How to run independent tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    ParallelWith(usize),
}

impl Execution {
    /// Parallel with an explicit worker count; 0 means "let rayon decide".
    pub fn with_workers(workers: usize) -> Self {
        match workers {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::ParallelWith(n),
        }
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::ParallelWith(workers) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
                Err(e) => {
                    log::warn!("could not build a {workers}-thread pool ({e}); running sequentially");
                    (0..n).map(f).collect()
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelWith(_) => (0..n).map(f).collect(),
    }
}
