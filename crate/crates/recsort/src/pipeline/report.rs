//! Execution reports: per-stage wall-clock busy spans plus the counters a
//! benchmark needs to reproduce a run.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use super::plan::SortMode;

/// Stage durations for one execution. Stages measure their own busy spans,
/// so in overlapped execution they may sum to more than `total` — the
/// overlap is the point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TimingBreakdown {
    pub total: Duration,
    pub read: Duration,
    pub sort: Duration,
    pub merge: Duration,
    pub write: Duration,
}

#[derive(Debug, Clone)]
pub struct ExecutionReport {
    pub mode: SortMode,
    pub timing: TimingBreakdown,
    pub record_count: u64,
    pub run_count: usize,
    pub partition_count: usize,
    /// High-water mark of the buffer pool during the execution.
    pub pool_peak_bytes: usize,
    pub pool_budget_bytes: usize,
    /// Whether any read was served by the page cache although direct I/O
    /// was requested.
    pub direct_io_fallback: bool,
}

/// Accumulates busy time from any number of workers.
#[derive(Default)]
pub(crate) struct BusyTimer {
    micros: AtomicU64,
}

impl BusyTimer {
    pub(crate) fn time<R>(&self, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.add(start.elapsed());
        out
    }

    pub(crate) fn add(&self, elapsed: Duration) {
        self.micros
            .fetch_add(elapsed.as_micros() as u64, Ordering::Relaxed);
    }

    pub(crate) fn total(&self) -> Duration {
        Duration::from_micros(self.micros.load(Ordering::Relaxed))
    }
}
