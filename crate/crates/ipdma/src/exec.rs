use ipdma_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Bounded rayon pool. Results come back in item order regardless of
/// which worker ran them.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `workers == 0` sizes the pool to the available cores.
    pub fn new(workers: usize) -> Result<Pool> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Pool { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
