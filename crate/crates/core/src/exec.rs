//! Data-parallel execution of independent work items.
//!
//! Every Monte Carlo loop in the crate is written as "evaluate item `i`,
//! then combine". Items only ever see their own index, so results do not
//! depend on how items are spread over threads. Two combinators are
//! provided:
//!
//! * [`map_collect`] returns per-item results in index order. Floating-point
//!   sums are folded sequentially over that vector afterwards, which keeps
//!   them bit-identical across thread counts.
//! * [`map_reduce`] merges with a caller-supplied operation. Only use it
//!   with merges that are exactly associative and commutative (integer
//!   counts, `max`), otherwise the result can depend on the split.
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] silently
//! runs sequentially.

use serde::{Deserialize, Serialize};

/// How a batch of independent items is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this build can actually run items concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0), …, f(count - 1)` and returns the results in index order.
pub fn map_collect<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..count).map(f).collect()
}

/// Evaluates `f(i)` for every index and merges the results.
///
/// `merge` must be associative and commutative with `identity` as its
/// neutral element.
pub fn map_reduce<T, F, I, M>(exec: Execution, count: usize, identity: I, f: F, merge: M) -> T
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
    I: Fn() -> T + Send + Sync,
    M: Fn(T, T) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).reduce(identity, merge);
    }
    let _ = exec;
    (0..count).map(f).fold(identity(), merge)
}

/// Splits `total` items into consecutive batches of at most `batch` items.
/// Returns `(start, len)` for batch `index`.
pub(crate) fn batch_bounds(total: usize, batch: usize, index: usize) -> (usize, usize) {
    let start = index * batch;
    (start, batch.min(total - start))
}

pub(crate) fn batch_count(total: usize, batch: usize) -> usize {
    total.div_ceil(batch)
}
