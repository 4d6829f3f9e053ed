//! Worker-pool configuration shared by the enumeration engines.

use std::time::{Duration, Instant};

/// How the index-set stream is cut into batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BatchPolicy {
    /// `max(1024, total / (64·workers))` sets per batch.
    #[default]
    Automatic,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelConfig {
    pub workers: usize,
    pub batch: BatchPolicy,
    /// Checked between batches; enumeration stops once it has passed.
    pub deadline: Option<Instant>,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        Self { workers: 1, batch: BatchPolicy::Automatic, deadline: None }
    }
}

impl ParallelConfig {
    pub fn with_workers(workers: usize) -> Self {
        Self { workers: workers.max(1), ..Self::default() }
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.deadline = timeout.map(|t| Instant::now() + t);
        self
    }

    pub fn batch_size(&self, total: u128) -> usize {
        match self.batch {
            BatchPolicy::Fixed(b) => b.max(1),
            BatchPolicy::Automatic => {
                let per = total / (64 * self.workers.max(1) as u128);
                per.clamp(1024, 1 << 20) as usize
            }
        }
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub(crate) fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(self.workers.max(1)).build().expect("failed to build worker pool")
    }
}
