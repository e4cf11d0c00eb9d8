//! The external path: form sorted runs, choose key-range partitions, then
//! run a three-stage read/merge/write pipeline over the partitions in order.
//! The reader pool loads partition p+1's slices while the merger works on p
//! and the writer appends p−1; bounded channels and the buffer pool supply
//! the back-pressure that keeps memory flat.

use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::thread;
use std::time::Instant;

use super::partition::{locate_partitions, sample_splitters, MergePartition};
use super::merge::{merge_partition, MergeInput};
use super::plan::{ExecConfig, SortPlan};
use super::report::{BusyTimer, ExecutionReport, TimingBreakdown};
use super::runs::form_runs;
use crate::error::{Error, Result, Stage};
use crate::io::{read_span_into, BufferLease, BufferPool, SourceFile, WriteSink};
use crate::par::FirstError;
use crate::record::RECORD_LEN;

/// Merged records are staged into blocks of this size before the writer
/// appends them (plain heap memory, counted under the plan's fixed
/// overhead; the pool throttles the partition-sized buffers).
const OUT_BLOCK: usize = 1 << 20;

/// Deletes the run directory on scope exit, success or failure.
struct RunDirGuard {
    path: PathBuf,
}

impl Drop for RunDirGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.path);
    }
}

struct LoadedPartition {
    /// (run index, slice bytes, record count) per non-empty slice.
    slices: Vec<(usize, BufferLease, usize)>,
}

pub fn execute_external(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    plan: &SortPlan,
    config: &ExecConfig,
    pool: &BufferPool,
) -> Result<ExecutionReport> {
    let input = input.as_ref();
    let output = output.as_ref();
    match execute_inner(input, output, plan, config, pool) {
        Ok(report) => Ok(report),
        Err(e) => {
            let _ = std::fs::remove_file(output);
            Err(e)
        }
    }
}

fn execute_inner(
    input: &Path,
    output: &Path,
    plan: &SortPlan,
    config: &ExecConfig,
    pool: &BufferPool,
) -> Result<ExecutionReport> {
    let total_start = Instant::now();

    if plan.record_count == 0 {
        let sink = WriteSink::streamed(output).map_err(|e| e.in_stage(Stage::Write))?;
        sink.finalize().map_err(|e| e.in_stage(Stage::Write))?;
        return Ok(ExecutionReport {
            mode: plan.mode,
            timing: TimingBreakdown {
                total: total_start.elapsed(),
                ..TimingBreakdown::default()
            },
            record_count: 0,
            run_count: 0,
            partition_count: 0,
            pool_peak_bytes: pool.peak(),
            pool_budget_bytes: pool.budget(),
            direct_io_fallback: false,
        });
    }

    // Sorted intermediate files live in a dedicated subdirectory beside the
    // output, removed on success and on failure.
    let run_dir = run_dir_for(output);
    std::fs::create_dir_all(&run_dir)
        .map_err(|e| Error::io("cannot create run directory", &run_dir, e))?;
    let _guard = RunDirGuard {
        path: run_dir.clone(),
    };

    let formation = form_runs(input, &run_dir, plan, config, pool)?;
    let runs = formation.runs;

    let merge_busy = BusyTimer::default();
    let read_busy = BusyTimer::default();
    let write_busy = BusyTimer::default();

    // Partition the key space from run samples.
    let (splitters, partitions) = merge_busy.time(|| -> Result<_> {
        let splitters = sample_splitters(&runs, plan.partition_count, config.samples_per_run)?;
        let partitions = locate_partitions(&runs, &splitters)?;
        Ok((splitters, partitions))
    })
    .map_err(|e| e.in_stage(Stage::Merge))?;
    drop(splitters);

    // Tiling check: partitions must cover every run record exactly once.
    let located: u64 = partitions.iter().map(|p| p.record_count()).sum();
    let formed: u64 = runs.iter().map(|r| r.record_count).sum();
    if located != formed || formed != plan.record_count {
        return Err(Error::InternalInvariant(format!(
            "partitions cover {located} records, runs hold {formed}, input has {}",
            plan.record_count
        ))
        .in_stage(Stage::Merge));
    }
    // A partition that cannot fit in the pool would starve the pipeline;
    // refuse it up front with a diagnosis instead of timing out later.
    for p in &partitions {
        let rounded: u64 = p
            .slices
            .iter()
            .map(|s| (s.count * RECORD_LEN as u64).div_ceil(4096) * 4096)
            .sum();
        if rounded + OUT_BLOCK as u64 > pool.budget() as u64 {
            return Err(Error::InvalidConfig(format!(
                "partition {} needs {rounded} bytes of slice buffers but the pool budget \
                 is {}; raise the memory limit or spread the key skew",
                p.index,
                pool.budget()
            ))
            .in_stage(Stage::Merge));
        }
    }

    let sink = WriteSink::streamed(output).map_err(|e| e.in_stage(Stage::Write))?;
    let failure = FirstError::default();
    let fallback = std::sync::atomic::AtomicBool::new(formation.direct_io_fallback);

    let (to_merger, from_reader) = sync_channel::<LoadedPartition>(config.queue_capacity);
    let (to_writer, from_merger) = sync_channel::<Vec<u8>>(8);

    thread::scope(|s| {
        // Reader pool: load partitions ahead of the merger, in order.
        s.spawn(|| {
            let to_merger = to_merger;
            let sources: Vec<SourceFile> = match runs
                .iter()
                .map(|r| SourceFile::open(&r.path, config.direct_io))
                .collect::<Result<_>>()
            {
                Ok(v) => v,
                Err(e) => {
                    failure.record(e.in_stage(Stage::Read));
                    return;
                }
            };
            for p in &partitions {
                if failure.is_set() {
                    return;
                }
                let loaded = read_busy.time(|| load_partition(p, &sources, plan, config, pool));
                match loaded {
                    Ok(loaded) => {
                        if to_merger.send(loaded).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        failure.record(e.in_stage(Stage::Read));
                        return;
                    }
                }
            }
            for src in &sources {
                if src.used_fallback() {
                    fallback.store(true, std::sync::atomic::Ordering::Relaxed);
                }
            }
        });

        // Merger: K-way merge each partition into output blocks.
        s.spawn(|| {
            let from_reader = from_reader;
            let to_writer = to_writer;
            while let Ok(loaded) = from_reader.recv() {
                let outcome = merge_busy.time(|| -> Result<()> {
                    let inputs: Vec<MergeInput> = loaded
                        .slices
                        .iter()
                        .map(|(run, lease, count)| MergeInput {
                            run: *run,
                            records: &lease.as_slice()[..count * RECORD_LEN],
                        })
                        .collect();
                    let mut block = Vec::with_capacity(OUT_BLOCK);
                    merge_partition(&inputs, |rec| {
                        block.extend_from_slice(rec);
                        if block.len() + RECORD_LEN > OUT_BLOCK {
                            let full = std::mem::replace(
                                &mut block,
                                Vec::with_capacity(OUT_BLOCK),
                            );
                            to_writer.send(full).map_err(|_| {
                                Error::InternalInvariant("writer hung up".into())
                            })?;
                        }
                        Ok(())
                    })?;
                    if !block.is_empty() {
                        to_writer
                            .send(block)
                            .map_err(|_| Error::InternalInvariant("writer hung up".into()))?;
                    }
                    Ok(())
                });
                drop(loaded);
                if let Err(e) = outcome {
                    failure.record(e.in_stage(Stage::Merge));
                    return;
                }
            }
        });

        // Writer: append blocks in arrival order.
        s.spawn(|| {
            let from_merger = from_merger;
            let mut cursor = 0u64;
            while let Ok(block) = from_merger.recv() {
                let outcome = write_busy.time(|| sink.write_at(cursor, &block));
                match outcome {
                    Ok(()) => cursor += block.len() as u64,
                    Err(e) => {
                        failure.record(e.in_stage(Stage::Write));
                        return;
                    }
                }
            }
        });
    });
    failure.into_result()?;

    let written = sink.finalize().map_err(|e| e.in_stage(Stage::Write))?;
    if written != plan.input_bytes {
        return Err(Error::InternalInvariant(format!(
            "output holds {written} bytes, expected {}",
            plan.input_bytes
        ))
        .in_stage(Stage::Write));
    }

    Ok(ExecutionReport {
        mode: plan.mode,
        timing: TimingBreakdown {
            total: total_start.elapsed(),
            read: formation.read_busy + read_busy.total(),
            sort: formation.sort_busy,
            merge: merge_busy.total(),
            write: formation.write_busy + write_busy.total(),
        },
        record_count: plan.record_count,
        run_count: runs.len(),
        partition_count: partitions.len(),
        pool_peak_bytes: pool.peak(),
        pool_budget_bytes: pool.budget(),
        direct_io_fallback: fallback.into_inner(),
    })
}

pub(crate) fn run_dir_for(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    output.with_file_name(format!("{name}.runs.tmp"))
}

fn load_partition(
    partition: &MergePartition,
    sources: &[SourceFile],
    plan: &SortPlan,
    config: &ExecConfig,
    pool: &BufferPool,
) -> Result<LoadedPartition> {
    let mut slices = Vec::with_capacity(partition.slices.len());
    for slice in &partition.slices {
        if slice.count == 0 {
            continue;
        }
        let bytes = (slice.count * RECORD_LEN as u64) as usize;
        let mut lease = pool.lease(bytes)?;
        read_span_into(
            &sources[slice.run],
            slice.start * RECORD_LEN as u64,
            &mut lease.as_mut_slice()[..bytes],
            config.scan_chunk(),
            plan.workers.readers,
        )?;
        slices.push((slice.run, lease, slice.count as usize));
    }
    Ok(LoadedPartition { slices })
}
