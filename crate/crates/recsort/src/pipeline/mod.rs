//! The adaptive sort driver: plan the mode from the memory budget, then run
//! either the in-memory path or the external run/partition/merge pipeline.

pub mod external;
pub mod internal;
pub mod merge;
pub mod partition;
pub mod plan;
pub mod report;
pub mod runs;

use std::path::Path;

pub use external::execute_external;
pub use internal::sort_internal;
pub use merge::{merge_partition, MergeInput};
pub use partition::{locate_partitions, sample_splitters, MergePartition, SliceRef};
pub use plan::{
    internal_estimate, minimum_budget, plan, ExecConfig, ModeChoice, SortMode, SortPlan,
    WorkerAllocation, KEYREF_WIDTH_ESTIMATE, PLAN_FIXED_OVERHEAD,
};
pub use report::{ExecutionReport, TimingBreakdown};
pub use runs::{form_runs, RunDescriptor, RunFormation};

use crate::error::{Error, Result, Stage};
use crate::io::BufferPool;

/// Plans and executes one sort: `input` to `output` under `memory_budget`
/// bytes. The returned report carries stage timings and the pool's
/// high-water mark.
pub fn sort_file(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    memory_budget: usize,
    mode: ModeChoice,
    config: &ExecConfig,
) -> Result<ExecutionReport> {
    let input = input.as_ref();
    let input_bytes = std::fs::metadata(input)
        .map_err(|e| Error::io("cannot stat", input, e).in_stage(Stage::Plan))?
        .len();
    let plan = plan(input_bytes, memory_budget, mode, config)
        .map_err(|e| e.in_stage(Stage::Plan))?;
    let pool = BufferPool::with_watchdog(memory_budget, config.pool_watchdog);
    match plan.mode {
        SortMode::Internal => sort_internal(input, output, &plan, config, &pool),
        SortMode::External => execute_external(input, output, &plan, config, &pool),
    }
}
