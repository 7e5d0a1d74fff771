//! Execution mode for the data-parallel parts of the pipeline.
//!
//! Every hot loop in the crate (record parsing, tree construction, window
//! diffing, multi-file rewriting, trace synthesis) goes through the helpers
//! here. With the `parallel` feature enabled they fan out over rayon's global
//! pool; without it, or with [`Execution::Sequential`], they run inline.
//! Results are identical in both modes: every helper preserves input order
//! and reductions are only used with associative, commutative combiners.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Selects how a batch operation is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential execution when the crate is built without
    /// the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when work will actually be spread over multiple threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `items`, keeping input order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over `0..n`, keeping index order.
    pub fn map_range<U, F>(self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Folds contiguous chunks of `items` into accumulators and merges them.
    ///
    /// `merge` must be associative and commutative with `identity()` as its
    /// unit; under that contract the result does not depend on the mode.
    pub fn fold_chunks<T, A, I, F, M>(self, items: &[T], identity: I, fold: F, merge: M) -> A
    where
        T: Sync,
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, &T) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().fold(&identity, &fold).reduce(&identity, &merge);
        }
        let _ = &merge;
        items.iter().fold(identity(), fold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_on_map_and_fold() {
        let data: Vec<u64> = (0..10_000).collect();
        for mode in [Execution::Sequential, Execution::Parallel] {
            let squares = mode.map(&data, |x| x * x);
            assert_eq!(squares[9_999], 9_999 * 9_999);
            let sum = mode.fold_chunks(&data, || 0u64, |a, x| a + x, |a, b| a + b);
            assert_eq!(sum, 9_999 * 10_000 / 2);
            assert_eq!(mode.map_range(5, |i| i * 2), vec![0, 2, 4, 6, 8]);
        }
    }
}
