//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] fans work
//! out over rayon's pool; without it, both variants run sequentially.
//! Results always come back in index order, so callers see identical
//! output either way.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps over mutable items with their index.
pub fn map_mut<S, T, F>(exec: Execution, items: &mut [S], f: F) -> Vec<T>
where
    S: Send,
    T: Send,
    F: Fn(usize, &mut S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items
            .par_iter_mut()
            .enumerate()
            .map(|(i, s)| f(i, s))
            .collect();
    }
    let _ = exec;
    items.iter_mut().enumerate().map(|(i, s)| f(i, s)).collect()
}

/// Map-reduce over `0..n`. `reduce` must be associative; `identity` is
/// called once per worker.
pub fn fold_range<A, ID, F, R>(exec: Execution, n: usize, identity: ID, fold: F, reduce: R) -> A
where
    A: Send,
    ID: Fn() -> A + Sync + Send,
    F: Fn(A, usize) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .fold(&identity, &fold)
            .reduce(&identity, &reduce);
    }
    let _ = (exec, &reduce);
    (0..n).fold(identity(), fold)
}
