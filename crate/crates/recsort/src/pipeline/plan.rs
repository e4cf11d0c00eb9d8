//! The adaptive decision record: internal vs external mode, run sizing, and
//! partition counts, all derived from the input size and the memory budget.

use std::time::Duration;

use crate::error::{Error, Result};
use crate::io::{record_scan_chunk, DirectIo, DEFAULT_CHUNK_SIZE};
use crate::radix::RadixConfig;
use crate::record::RECORD_LEN;

/// Bytes charged per key reference in every memory estimate: 10 key octets
/// plus an 8-byte ordinal. Pinned here so planning arithmetic is
/// reproducible regardless of in-memory struct padding.
pub const KEYREF_WIDTH_ESTIMATE: u64 = 18;

/// Flat allowance for staging buffers, queues, and thread stacks.
pub const PLAN_FIXED_OVERHEAD: u64 = 8 * 1024 * 1024;

/// Runs are sized in whole multiples of this many records so their byte
/// offsets stay sector-aligned (128 records = 12800 bytes, a multiple of
/// both the record and the 512-byte sector).
const RUN_SIZE_QUANTUM: u64 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortMode {
    Internal,
    External,
}

impl std::fmt::Display for SortMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SortMode::Internal => "internal",
            SortMode::External => "external",
        })
    }
}

/// Caller's mode request: decide from the estimate, or force one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeChoice {
    #[default]
    Auto,
    Internal,
    External,
}

#[derive(Debug, Clone, Copy)]
pub struct WorkerAllocation {
    pub readers: usize,
    pub sorters: usize,
    pub mergers: usize,
    pub writers: usize,
}

/// Execution knobs shared by both pipelines.
#[derive(Debug, Clone)]
pub struct ExecConfig {
    /// Sort workers; also the default basis for reader counts.
    pub threads: usize,
    /// Concurrent read requests. Parallel positional reads keep paying off
    /// up to a queue depth of about 10, so the default caps there.
    pub readers: Option<usize>,
    pub chunk_size: usize,
    pub direct_io: DirectIo,
    pub radix: RadixConfig,
    /// Capacity of the bounded hand-off queues, in runs or partitions.
    pub queue_capacity: usize,
    /// Keys sampled per run when choosing merge splitters.
    pub samples_per_run: usize,
    /// How long a starved buffer-pool request waits before failing loudly.
    pub pool_watchdog: Duration,
}

impl Default for ExecConfig {
    fn default() -> Self {
        let threads = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        ExecConfig {
            threads,
            readers: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
            direct_io: DirectIo::default(),
            radix: RadixConfig::default(),
            queue_capacity: 2,
            samples_per_run: 128,
            pool_watchdog: Duration::from_secs(60),
        }
    }
}

impl ExecConfig {
    pub fn with_threads(threads: usize) -> Self {
        let mut config = ExecConfig {
            threads,
            ..ExecConfig::default()
        };
        config.radix.worker_count = threads;
        config
    }

    pub fn effective_readers(&self) -> usize {
        self.readers.unwrap_or_else(|| self.threads.min(10)).max(1)
    }

    /// Chunk size rounded for record scans (record- and sector-aligned).
    pub fn scan_chunk(&self) -> usize {
        record_scan_chunk(self.chunk_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidConfig("thread count must be at least 1".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk size must be positive".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::InvalidConfig("queue capacity must be at least 1".into()));
        }
        if self.samples_per_run == 0 {
            return Err(Error::InvalidConfig("samples per run must be at least 1".into()));
        }
        self.radix.validate()
    }
}

/// The decision record for one sort execution.
#[derive(Debug, Clone)]
pub struct SortPlan {
    pub mode: SortMode,
    pub input_bytes: u64,
    pub record_count: u64,
    pub memory_budget: usize,
    /// Records per run; meaningful in external mode.
    pub run_size: u64,
    /// Merge partitions; meaningful in external mode.
    pub partition_count: usize,
    pub workers: WorkerAllocation,
}

impl SortPlan {
    pub fn run_count(&self) -> u64 {
        if self.record_count == 0 {
            0
        } else {
            self.record_count.div_ceil(self.run_size)
        }
    }
}

/// Estimated peak memory of sorting `record_count` records in place: the
/// records themselves, one key reference per record, an equal auxiliary
/// buffer, and the fixed overhead.
pub fn internal_estimate(record_count: u64) -> u64 {
    record_count * RECORD_LEN as u64
        + 2 * record_count * KEYREF_WIDTH_ESTIMATE
        + PLAN_FIXED_OVERHEAD
}

/// Smallest budget the pipelines can move data under: a few chunks in
/// flight per stage.
pub fn minimum_budget(config: &ExecConfig) -> usize {
    8 * config.scan_chunk()
}

/// Chooses between the internal and external paths and sizes the external
/// machinery. Internal when the whole working set fits the budget; external
/// runs get a quarter of the budget each so the overlapped next-run read and
/// previous-run write have headroom, and partitions likewise.
pub fn plan(
    input_bytes: u64,
    memory_budget: usize,
    mode: ModeChoice,
    config: &ExecConfig,
) -> Result<SortPlan> {
    config.validate()?;
    if !input_bytes.is_multiple_of(RECORD_LEN as u64) {
        return Err(Error::MalformedInput(format!(
            "input of {input_bytes} bytes is not a whole number of {RECORD_LEN}-byte records"
        )));
    }
    let floor = minimum_budget(config);
    if memory_budget < floor {
        return Err(Error::InvalidConfig(format!(
            "memory budget of {memory_budget} bytes is below the minimum working set of \
             {floor} bytes (8 chunks of {})",
            config.scan_chunk()
        )));
    }

    let record_count = input_bytes / RECORD_LEN as u64;
    let chosen = match mode {
        ModeChoice::Internal => SortMode::Internal,
        ModeChoice::External => SortMode::External,
        ModeChoice::Auto => {
            if internal_estimate(record_count) <= memory_budget as u64 {
                SortMode::Internal
            } else {
                SortMode::External
            }
        }
    };

    // One run's working set (records + keyrefs + auxiliary) fits a quarter
    // of the budget, in whole sector-aligned quanta.
    let per_run_budget = memory_budget as u64 / 4;
    let raw_run_size = per_run_budget / (RECORD_LEN as u64 + 2 * KEYREF_WIDTH_ESTIMATE);
    let run_size = (raw_run_size / RUN_SIZE_QUANTUM * RUN_SIZE_QUANTUM).max(RUN_SIZE_QUANTUM);
    // Partitions sized to a quarter of the budget as well, so two can be in
    // flight with room to spare.
    let partition_count = input_bytes.div_ceil(per_run_budget.max(1)).max(1) as usize;

    Ok(SortPlan {
        mode: chosen,
        input_bytes,
        record_count,
        memory_budget,
        run_size,
        partition_count,
        workers: WorkerAllocation {
            readers: config.effective_readers(),
            sorters: config.threads,
            mergers: 1,
            writers: 1,
        },
    })
}
