//! Merge partitioning: splitter selection by run sampling and per-run slice
//! location by binary search, so each partition covers one key range across
//! every run and partitions tile the runs exactly.

use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::Path;

use super::runs::RunDescriptor;
use crate::error::{Error, Result};
use crate::record::{Key, KEY_LEN, RECORD_LEN};

/// The part of one run belonging to one partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceRef {
    pub run: usize,
    /// First record index within the run.
    pub start: u64,
    pub count: u64,
}

/// One merge lane: a key range plus the run slices whose keys fall in it.
#[derive(Debug, Clone)]
pub struct MergePartition {
    pub index: usize,
    /// Inclusive lower key bound; `None` for the first partition.
    pub lower: Option<Key>,
    /// Exclusive upper key bound; `None` for the last partition.
    pub upper: Option<Key>,
    pub slices: Vec<SliceRef>,
}

impl MergePartition {
    pub fn record_count(&self) -> u64 {
        self.slices.iter().map(|s| s.count).sum()
    }

    pub fn byte_count(&self) -> u64 {
        self.record_count() * RECORD_LEN as u64
    }
}

/// Reads single keys out of a run file by record index.
struct RunKeyReader {
    file: File,
    count: u64,
}

impl RunKeyReader {
    fn open(run: &RunDescriptor) -> Result<Self> {
        let file =
            File::open(&run.path).map_err(|e| Error::io("cannot open run", &run.path, e))?;
        Ok(RunKeyReader {
            file,
            count: run.record_count,
        })
    }

    fn key_at(&self, index: u64, path: &Path) -> Result<Key> {
        let mut key = [0u8; KEY_LEN];
        self.file
            .read_exact_at(&mut key, index * RECORD_LEN as u64)
            .map_err(|e| Error::io("cannot read run key", path, e))?;
        Ok(key)
    }
}

/// Picks `partition_count - 1` ascending splitter keys by sampling up to
/// `samples_per_run` evenly spaced keys from every run and taking
/// order-statistic quantiles. Splitters may repeat under extreme skew;
/// downstream tolerates the resulting empty partitions.
pub fn sample_splitters(
    runs: &[RunDescriptor],
    partition_count: usize,
    samples_per_run: usize,
) -> Result<Vec<Key>> {
    assert!(!runs.is_empty(), "splitter sampling needs at least one run");
    assert!(partition_count >= 1);
    assert!(samples_per_run >= 1);
    if partition_count == 1 {
        return Ok(Vec::new());
    }
    let mut samples: Vec<Key> = Vec::with_capacity(runs.len() * samples_per_run);
    for run in runs {
        if run.record_count == 0 {
            continue;
        }
        let reader = RunKeyReader::open(run)?;
        let take = (samples_per_run as u64).min(run.record_count);
        for j in 0..take {
            let index = j * run.record_count / take;
            samples.push(reader.key_at(index, &run.path)?);
        }
    }
    if samples.is_empty() {
        return Ok(vec![[0u8; KEY_LEN]; partition_count - 1]);
    }
    samples.sort_unstable();
    let splitters = (1..partition_count)
        .map(|i| samples[i * samples.len() / partition_count])
        .collect();
    Ok(splitters)
}

/// First record index of `reader` whose key is `>= splitter`, by binary
/// search. The probes the search makes double as a sortedness spot check:
/// two probes at ascending indices with descending keys prove the run
/// unsorted.
fn lower_bound(reader: &RunKeyReader, splitter: &Key, path: &Path) -> Result<u64> {
    let mut lo = 0u64;
    let mut hi = reader.count;
    let mut probes: Vec<(u64, Key)> = Vec::new();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let key = reader.key_at(mid, path)?;
        probes.push((mid, key));
        if key < *splitter {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    probes.sort_unstable_by_key(|(i, _)| *i);
    for pair in probes.windows(2) {
        if pair[0].1 > pair[1].1 {
            return Err(Error::DataIntegrity(format!(
                "run `{}` is not sorted: key at record {} exceeds key at record {}",
                path.display(),
                pair[0].0,
                pair[1].0
            )));
        }
    }
    Ok(lo)
}

/// Locates every partition's slice within every run. Slice boundaries across
/// consecutive splitters must be monotone, which is also the cheap unsorted
/// run detector.
pub fn locate_partitions(
    runs: &[RunDescriptor],
    splitters: &[Key],
) -> Result<Vec<MergePartition>> {
    for pair in splitters.windows(2) {
        if pair[0] > pair[1] {
            return Err(Error::InvalidConfig("splitters are not ascending".into()));
        }
    }
    // Equal splitters delimit empty partitions; deduplicate for the search
    // but keep the full partition count so lanes line up with the plan.
    let partition_count = splitters.len() + 1;

    // boundaries[r] holds partition_count + 1 record indices tiling run r.
    let mut boundaries: Vec<Vec<u64>> = Vec::with_capacity(runs.len());
    for run in runs {
        let reader = RunKeyReader::open(run)?;
        let mut bounds = Vec::with_capacity(partition_count + 1);
        bounds.push(0u64);
        for splitter in splitters {
            let at = lower_bound(&reader, splitter, &run.path)?;
            if at < *bounds.last().unwrap() {
                return Err(Error::DataIntegrity(format!(
                    "run `{}` is not sorted: partition boundaries regress",
                    run.path.display()
                )));
            }
            bounds.push(at);
        }
        bounds.push(run.record_count);
        boundaries.push(bounds);
    }

    let mut partitions = Vec::with_capacity(partition_count);
    for p in 0..partition_count {
        let lower = if p == 0 { None } else { Some(splitters[p - 1]) };
        let upper = if p == partition_count - 1 {
            None
        } else {
            Some(splitters[p])
        };
        let slices = runs
            .iter()
            .enumerate()
            .map(|(r, _)| SliceRef {
                run: r,
                start: boundaries[r][p],
                count: boundaries[r][p + 1] - boundaries[r][p],
            })
            .collect();
        partitions.push(MergePartition {
            index: p,
            lower,
            upper,
            slices,
        });
    }
    Ok(partitions)
}
