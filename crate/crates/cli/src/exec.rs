//! Parallel run execution.
//!
//! Jobs carry their own derived seeds, so results are identical for any
//! worker count; the executor only changes wall time.

use algforge_core::trainer::{execute_job, RunExecutor, RunJob, TaskSpec, TrainConfig};
use rayon::prelude::*;

/// Runs jobs on a bounded rayon pool, preserving job order in the output.
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl PoolExecutor {
    pub fn new(workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .expect("thread pool");
        PoolExecutor { pool }
    }
}

impl RunExecutor for PoolExecutor {
    fn run_batch(&self, task: &TaskSpec, cfg: &TrainConfig, jobs: &[RunJob]) -> Vec<f64> {
        self.pool.install(|| {
            jobs.par_iter()
                .map(|job| execute_job(task, cfg, job))
                .collect()
        })
    }
}

/// Executor for a worker-count setting: serial for one worker, pooled
/// otherwise.
pub fn executor_for(workers: usize) -> Box<dyn RunExecutor> {
    if workers <= 1 {
        Box::new(algforge_core::trainer::SerialExecutor)
    } else {
        Box::new(PoolExecutor::new(workers))
    }
}
