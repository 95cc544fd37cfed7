//! Trial scheduling.
//!
//! Labs express their work as a pure function of the trial index and hand it
//! to a [`TrialExecutor`]. Results always come back in index order, so any
//! reduction over them is independent of the degree of parallelism.

use alloc::vec::Vec;
use core::ops::Range;

pub trait TrialExecutor: Sync {
    /// Evaluate `f` on every index in `range`, returning results in index order.
    fn map_indexed<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialExecutor for Sequential {
    fn map_indexed<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        range.map(f).collect()
    }
}
