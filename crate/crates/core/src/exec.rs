//! Index-parallel execution.
//!
//! Monte-Carlo loops in this crate are expressed as a map over sample
//! indices. Every sample derives its own random stream from `(seed, index)`,
//! so any executor produces the same output as [`Sequential`].

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every index on the calling thread, in order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
