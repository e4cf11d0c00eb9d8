//! The in-memory path: read the whole file once (extracting key references
//! as chunks land), radix-sort the references, then scatter records to their
//! final positions through the mapped sink, in parallel over output ranges.

use std::path::Path;
use std::thread;
use std::time::Instant;

use super::plan::{ExecConfig, SortPlan};
use super::report::{ExecutionReport, TimingBreakdown};
use crate::error::{Error, Result, Stage};
use crate::io::{BufferPool, SourceFile, WriteSink};
use crate::par::{split_even, FirstError};
use crate::radix::msd_radix_sort;
use crate::record::{extract_keyrefs_into, KeyRef, RECORD_LEN};

/// Records gathered into one staging block before a sink write.
pub(crate) const GATHER_BLOCK_RECORDS: usize = 1024;

pub fn sort_internal(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    plan: &SortPlan,
    config: &ExecConfig,
    pool: &BufferPool,
) -> Result<ExecutionReport> {
    let input = input.as_ref();
    let output = output.as_ref();
    let total_start = Instant::now();
    let record_count = plan.record_count as usize;
    let input_bytes = plan.input_bytes as usize;

    if record_count == 0 {
        let sink = WriteSink::mapped(output, 0).map_err(|e| e.in_stage(Stage::Write))?;
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

    // Read pass: chunked positional parallel reads into one contiguous
    // buffer, each chunk's key references extracted as it lands.
    let read_start = Instant::now();
    let src = SourceFile::open(input, config.direct_io).map_err(|e| e.in_stage(Stage::Read))?;
    let actual = src.len().map_err(|e| e.in_stage(Stage::Read))?;
    if actual != plan.input_bytes {
        return Err(Error::DataIntegrity(format!(
            "input `{}` holds {actual} bytes but the plan was made for {}",
            input.display(),
            plan.input_bytes
        ))
        .in_stage(Stage::Read));
    }
    let mut lease = pool.lease(input_bytes).map_err(|e| e.in_stage(Stage::Read))?;
    let mut keyrefs = vec![KeyRef::default(); record_count];
    {
        let buf = &mut lease.as_mut_slice()[..input_bytes];
        let scan = config.scan_chunk();
        let records_per_chunk = scan / RECORD_LEN;
        let readers = plan.workers.readers.max(1);

        // Byte chunks and keyref chunks pair up exactly because the scan
        // chunk is a whole number of records.
        let tasks: Vec<(u64, &mut [u8], &mut [KeyRef])> = buf
            .chunks_mut(scan)
            .zip(keyrefs.chunks_mut(records_per_chunk))
            .enumerate()
            .map(|(i, (bytes, refs))| ((i * scan) as u64, bytes, refs))
            .collect();
        let mut per_reader: Vec<Vec<_>> = (0..readers).map(|_| Vec::new()).collect();
        for (i, task) in tasks.into_iter().enumerate() {
            per_reader[i % readers].push(task);
        }

        let failure = FirstError::default();
        thread::scope(|s| {
            for work in per_reader {
                let src = &src;
                let failure = &failure;
                s.spawn(move || {
                    for (offset, bytes, refs) in work {
                        if failure.is_set() {
                            return;
                        }
                        let outcome = src.read_exact_at(bytes, offset).and_then(|()| {
                            extract_keyrefs_into(bytes, offset / RECORD_LEN as u64, refs)
                        });
                        if let Err(e) = outcome {
                            failure.record(e);
                            return;
                        }
                    }
                });
            }
        });
        failure.into_result().map_err(|e| e.in_stage(Stage::Read))?;
    }
    let read = read_start.elapsed();

    // Sort pass: key references only; records do not move yet.
    let sort_start = Instant::now();
    msd_radix_sort(&mut keyrefs, &config.radix);
    let sort = sort_start.elapsed();

    // Write pass: scatter records to their output positions through the
    // pre-sized mapped sink, partitioned by output range.
    let write_start = Instant::now();
    let sink = WriteSink::mapped(output, plan.input_bytes).map_err(|e| e.in_stage(Stage::Write))?;
    {
        let records = lease.as_slice();
        let failure = FirstError::default();
        let ranges = split_even(record_count, plan.workers.sorters.max(1));
        thread::scope(|s| {
            for range in ranges {
                let sink = &sink;
                let failure = &failure;
                let keyrefs = &keyrefs;
                s.spawn(move || {
                    if let Err(e) = gather_into_sink(records, &keyrefs[range.clone()], range.start, sink) {
                        failure.record(e);
                    }
                });
            }
        });
        failure.into_result().map_err(|e| e.in_stage(Stage::Write))?;
    }
    sink.finalize().map_err(|e| e.in_stage(Stage::Write))?;
    let write = write_start.elapsed();
    drop(lease);

    Ok(ExecutionReport {
        mode: plan.mode,
        timing: TimingBreakdown {
            total: total_start.elapsed(),
            read,
            sort,
            write,
            ..TimingBreakdown::default()
        },
        record_count: plan.record_count,
        run_count: 0,
        partition_count: 0,
        pool_peak_bytes: pool.peak(),
        pool_budget_bytes: pool.budget(),
        direct_io_fallback: src.used_fallback(),
    })
}

/// Copies the records named by `order` (a slice of the sorted keyref array
/// starting at output record `first_out`) from `records` into the sink,
/// staging a block at a time.
fn gather_into_sink(
    records: &[u8],
    order: &[KeyRef],
    first_out: usize,
    sink: &WriteSink,
) -> Result<()> {
    let mut block = Vec::with_capacity(GATHER_BLOCK_RECORDS * RECORD_LEN);
    let mut block_first = first_out;
    for (i, kr) in order.iter().enumerate() {
        let src = kr.ordinal as usize * RECORD_LEN;
        block.extend_from_slice(&records[src..src + RECORD_LEN]);
        if block.len() == GATHER_BLOCK_RECORDS * RECORD_LEN || i + 1 == order.len() {
            sink.write_at((block_first * RECORD_LEN) as u64, &block)?;
            block_first += block.len() / RECORD_LEN;
            block.clear();
        }
    }
    Ok(())
}

/// Gathers records into an in-memory buffer in `order`; used by the run
/// former. Parallel over output ranges.
pub(crate) fn gather_into_buffer(records: &[u8], order: &[KeyRef], out: &mut [u8], threads: usize) {
    assert_eq!(out.len(), order.len() * RECORD_LEN);
    let ranges = split_even(order.len(), threads.max(1));
    if ranges.len() <= 1 {
        gather_range(records, order, out);
        return;
    }
    // Disjoint output chunks, one per range.
    let mut chunks: Vec<&mut [u8]> = Vec::with_capacity(ranges.len());
    let mut rest = out;
    for range in &ranges {
        let (head, tail) = rest.split_at_mut(range.len() * RECORD_LEN);
        chunks.push(head);
        rest = tail;
    }
    thread::scope(|s| {
        for (range, chunk) in ranges.iter().zip(chunks) {
            let order = &order[range.clone()];
            s.spawn(move || gather_range(records, order, chunk));
        }
    });
}

fn gather_range(records: &[u8], order: &[KeyRef], out: &mut [u8]) {
    for (slot, kr) in out.chunks_exact_mut(RECORD_LEN).zip(order) {
        let src = kr.ordinal as usize * RECORD_LEN;
        slot.copy_from_slice(&records[src..src + RECORD_LEN]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mix::Splitmix;

    #[test]
    fn buffer_gather_reorders_records() {
        let mut rng = Splitmix::keyed(5, 5);
        let n = 300;
        let mut records = vec![0u8; n * RECORD_LEN];
        rng.fill_bytes(&mut records);
        let mut order: Vec<KeyRef> = (0..n as u64).map(|i| KeyRef { key: [0; 10], ordinal: i }).collect();
        // Reverse order: output j takes record n-1-j.
        order.reverse();
        for threads in [1usize, 4] {
            let mut out = vec![0u8; n * RECORD_LEN];
            gather_into_buffer(&records, &order, &mut out, threads);
            for j in 0..n {
                let src = (n - 1 - j) * RECORD_LEN;
                assert_eq!(
                    &out[j * RECORD_LEN..(j + 1) * RECORD_LEN],
                    &records[src..src + RECORD_LEN]
                );
            }
        }
    }
}
