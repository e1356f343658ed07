//! Trial-parallel execution.
//!
//! A trial is a pure function of its index. Results are gathered in index
//! order, so any aggregate is identical for every worker count.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::{Error, Result};

const CHUNK_PER_WORKER: u64 = 512;

#[derive(Clone)]
pub struct Executor {
    workers: usize,
    pool: Option<Arc<rayon::ThreadPool>>,
    deadline: Option<Instant>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers)
            .field("deadline", &self.deadline)
            .finish()
    }
}

/// Results of the completed prefix `0..results.len()` of the requested trials.
#[derive(Debug, Clone)]
pub struct TrialBatch<T> {
    pub results: Vec<T>,
    /// The deadline passed before all trials ran.
    pub truncated: bool,
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::param("workers", "must be at least 1"));
        }
        let pool = if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::param("workers", e.to_string()))?;
            Some(Arc::new(pool))
        } else {
            None
        };
        Ok(Self { workers, pool, deadline: None })
    }

    pub fn serial() -> Self {
        Self { workers: 1, pool: None, deadline: None }
    }

    /// One worker per available core.
    pub fn available() -> Self {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self::new(n).unwrap_or_else(|_| Self::serial())
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Runs `f(i)` for `i in 0..trials`.
    ///
    /// The deadline is checked between chunks, after the first one; on expiry
    /// the completed prefix is returned with `truncated = true`. The first error aborts the run.
    pub fn map_trials<T, F>(&self, trials: u64, f: F) -> Result<TrialBatch<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync,
    {
        let chunk = CHUNK_PER_WORKER * self.workers as u64;
        let mut results = Vec::with_capacity(trials.min(1 << 24) as usize);
        let mut start = 0;
        while start < trials {
            if start > 0 && self.expired() {
                return Ok(TrialBatch { results, truncated: true });
            }
            let end = (start + chunk).min(trials);
            match &self.pool {
                Some(pool) => {
                    let part: Vec<T> = pool.install(|| {
                        (start..end).into_par_iter().map(&f).collect::<Result<Vec<T>>>()
                    })?;
                    results.extend(part);
                }
                None => {
                    for i in start..end {
                        results.push(f(i)?);
                    }
                }
            }
            start = end;
        }
        Ok(TrialBatch { results, truncated: false })
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::available()
    }
}
