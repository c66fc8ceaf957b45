//! Pluggable execution of independent work items (chains, replicates).
//!
//! The core crate only ships the sequential executor; threaded executors
//! live in the std companion crate. Results are always returned in item
//! order, so output does not depend on scheduling.

use alloc::vec::Vec;

pub trait Executor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
