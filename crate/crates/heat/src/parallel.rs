//! Row scoring on a rayon thread pool.

use heat_core::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// Environment variable read by [`RayonExecutor::from_env`].
pub const WORKERS_VAR: &str = "HEAT_WORKERS";

pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    /// `workers == 0` lets rayon pick (one per core).
    pub fn new(workers: usize) -> Result<Self, ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("heat-{i}"))
            .build()?;
        Ok(RayonExecutor { pool })
    }

    /// Sized from `HEAT_WORKERS` when it holds a positive integer.
    pub fn from_env() -> Result<Self, ThreadPoolBuildError> {
        let workers = std::env::var(WORKERS_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        Self::new(workers)
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        // Indexed collect keeps index order.
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }
}
