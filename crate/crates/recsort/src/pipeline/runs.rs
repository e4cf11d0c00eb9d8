//! Run formation: the external path's first pass. Reads the input in
//! run-sized trunks, sorts each, and writes sorted intermediate files —
//! with the read of run i+1 overlapping the sort of run i and the write of
//! run i−1 through bounded hand-off channels.

use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::thread;
use std::time::Duration;

use super::internal::gather_into_buffer;
use super::plan::{ExecConfig, SortPlan};
use super::report::BusyTimer;
use crate::error::{Error, Result, Stage};
use crate::io::{read_span_into, BufferLease, BufferPool, SourceFile, WriteSink};
use crate::par::FirstError;
use crate::radix::msd_radix_sort;
use crate::record::{extract_keyrefs, Key, KeyRef, RECORD_LEN};

/// One sorted intermediate file.
#[derive(Debug, Clone)]
pub struct RunDescriptor {
    pub path: PathBuf,
    pub record_count: u64,
    pub first_key: Key,
    pub last_key: Key,
}

/// Run formation outcome: the descriptors plus per-stage busy time.
pub struct RunFormation {
    pub runs: Vec<RunDescriptor>,
    pub read_busy: Duration,
    pub sort_busy: Duration,
    pub write_busy: Duration,
    pub direct_io_fallback: bool,
}

struct LoadedRun {
    index: u64,
    lease: BufferLease,
    bytes: usize,
    keyrefs: Vec<KeyRef>,
}

struct SortedRun {
    index: u64,
    lease: BufferLease,
    bytes: usize,
    record_count: u64,
    first_key: Key,
    last_key: Key,
}

/// Splits the input into `plan.run_size`-record runs, each internally
/// key-sorted, written as `run-{index}` under `run_dir`. The concatenation
/// of all runs is a permutation of the input.
pub fn form_runs(
    input: impl AsRef<Path>,
    run_dir: impl AsRef<Path>,
    plan: &SortPlan,
    config: &ExecConfig,
    pool: &BufferPool,
) -> Result<RunFormation> {
    let input = input.as_ref();
    let run_dir = run_dir.as_ref();
    let run_count = plan.run_count();
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

    let read_busy = BusyTimer::default();
    let sort_busy = BusyTimer::default();
    let write_busy = BusyTimer::default();
    let failure = FirstError::default();
    let descriptors: std::sync::Mutex<Vec<RunDescriptor>> = std::sync::Mutex::new(Vec::new());

    let (to_sorter, from_reader) = sync_channel::<LoadedRun>(config.queue_capacity);
    let (to_writer, from_sorter) = sync_channel::<SortedRun>(config.queue_capacity);

    thread::scope(|s| {
        // Reader: fill one leased buffer per run and extract key references.
        s.spawn(|| {
            let to_sorter = to_sorter;
            for index in 0..run_count {
                if failure.is_set() {
                    return;
                }
                let first_record = index * plan.run_size;
                let records = plan.run_size.min(plan.record_count - first_record);
                let bytes = (records * RECORD_LEN as u64) as usize;
                let loaded = read_busy.time(|| -> Result<LoadedRun> {
                    let mut lease = pool.lease(bytes)?;
                    read_span_into(
                        &src,
                        first_record * RECORD_LEN as u64,
                        &mut lease.as_mut_slice()[..bytes],
                        config.scan_chunk(),
                        plan.workers.readers,
                    )?;
                    let keyrefs = extract_keyrefs(&lease.as_slice()[..bytes], 0)?;
                    Ok(LoadedRun {
                        index,
                        lease,
                        bytes,
                        keyrefs,
                    })
                });
                match loaded {
                    Ok(run) => {
                        if to_sorter.send(run).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        failure.record(e.in_stage(Stage::Read));
                        return;
                    }
                }
            }
        });

        // Sorter: order the key references, then gather records into a
        // second leased buffer in sorted order.
        s.spawn(|| {
            let to_writer = to_writer;
            let from_reader = from_reader;
            while let Ok(mut run) = from_reader.recv() {
                let sorted = sort_busy.time(|| -> Result<SortedRun> {
                    msd_radix_sort(&mut run.keyrefs, &config.radix);
                    let mut out = pool.lease(run.bytes)?;
                    gather_into_buffer(
                        &run.lease.as_slice()[..run.bytes],
                        &run.keyrefs,
                        &mut out.as_mut_slice()[..run.bytes],
                        config.threads,
                    );
                    let first_key = run.keyrefs.first().expect("runs are never empty").key;
                    let last_key = run.keyrefs.last().expect("runs are never empty").key;
                    Ok(SortedRun {
                        index: run.index,
                        lease: out,
                        bytes: run.bytes,
                        record_count: run.keyrefs.len() as u64,
                        first_key,
                        last_key,
                    })
                });
                drop(run.lease);
                match sorted {
                    Ok(sorted) => {
                        if to_writer.send(sorted).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        failure.record(e.in_stage(Stage::Sort));
                        return;
                    }
                }
            }
        });

        // Writer: stream each sorted buffer to its run file.
        s.spawn(|| {
            let from_sorter = from_sorter;
            while let Ok(run) = from_sorter.recv() {
                let written = write_busy.time(|| -> Result<RunDescriptor> {
                    let path = run_dir.join(format!("run-{}", run.index));
                    let sink = WriteSink::streamed(&path)?;
                    sink.write_at(0, &run.lease.as_slice()[..run.bytes])?;
                    sink.finalize()?;
                    Ok(RunDescriptor {
                        path,
                        record_count: run.record_count,
                        first_key: run.first_key,
                        last_key: run.last_key,
                    })
                });
                drop(run.lease);
                match written {
                    Ok(desc) => descriptors.lock().unwrap().push(desc),
                    Err(e) => {
                        failure.record(e.in_stage(Stage::Write));
                        return;
                    }
                }
            }
        });
    });

    failure.into_result()?;
    let mut runs = descriptors.into_inner().unwrap();
    // The writer sees runs in index order already; sort defensively anyway.
    runs.sort_by_key(|d| {
        d.path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("run-"))
            .and_then(|n| n.parse::<u64>().ok())
            .unwrap_or(u64::MAX)
    });
    if runs.len() as u64 != run_count {
        return Err(Error::InternalInvariant(format!(
            "formed {} of {run_count} runs",
            runs.len()
        )));
    }
    Ok(RunFormation {
        runs,
        read_busy: read_busy.total(),
        sort_busy: sort_busy.total(),
        write_busy: write_busy.total(),
        direct_io_fallback: src.used_fallback(),
    })
}
