//! Intra-stage parallelism control.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable capping worker threads. Unset means single-threaded.
pub const THREADS_ENV: &str = "SEASONMATCH_THREADS";

/// Either sequential execution or a dedicated rayon pool. Results are always
/// returned in index order.
#[derive(Debug, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    Pool(rayon::ThreadPool),
}

impl Parallelism {
    pub fn threads(n: usize) -> Result<Self> {
        if n <= 1 {
            return Ok(Parallelism::Sequential);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(Parallelism::Pool)
            .map_err(|e| Error::config(format!("thread pool: {e}")))
    }

    pub fn from_env() -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("{THREADS_ENV}={v} is not a thread count")))?;
                Self::threads(n)
            }
            Err(_) => Ok(Parallelism::Sequential),
        }
    }

    pub fn is_sequential(&self) -> bool {
        matches!(self, Parallelism::Sequential)
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Parallelism::Sequential => (0..n).map(f).collect(),
            Parallelism::Pool(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}
