//! K-way merge of sorted record slices via a min-heap of run cursors.
//! Ties across runs break by run index, so merge output is deterministic
//! for any worker configuration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::record::{Key, KEY_LEN, RECORD_LEN};

/// One sorted slice of one run, fully resident in memory.
pub struct MergeInput<'a> {
    pub run: usize,
    pub records: &'a [u8],
}

struct HeapEntry {
    key: Key,
    run: usize,
    cursor: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.run == other.run
    }
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the minimum
        // (key, run) on top.
        (other.key, other.run).cmp(&(self.key, self.run))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Cursor<'a> {
    run: usize,
    records: &'a [u8],
    pos: usize,
    len: usize,
}

impl<'a> Cursor<'a> {
    fn key(&self) -> Key {
        let start = self.pos * RECORD_LEN;
        self.records[start..start + KEY_LEN].try_into().unwrap()
    }

    fn record(&self) -> &'a [u8] {
        let start = self.pos * RECORD_LEN;
        &self.records[start..start + RECORD_LEN]
    }
}

/// Merges the sorted inputs into one key-sorted stream delivered to `emit`
/// record by record. Returns the number of records emitted. An input whose
/// keys regress is reported as a data-integrity error.
pub fn merge_partition<F>(inputs: &[MergeInput<'_>], mut emit: F) -> Result<u64>
where
    F: FnMut(&[u8]) -> Result<()>,
{
    let mut cursors: Vec<Cursor> = Vec::with_capacity(inputs.len());
    for input in inputs {
        debug_assert_eq!(input.records.len() % RECORD_LEN, 0);
        let len = input.records.len() / RECORD_LEN;
        cursors.push(Cursor {
            run: input.run,
            records: input.records,
            pos: 0,
            len,
        });
    }

    let mut heap = BinaryHeap::with_capacity(cursors.len());
    for (i, cursor) in cursors.iter().enumerate() {
        if cursor.len > 0 {
            heap.push(HeapEntry {
                key: cursor.key(),
                run: cursor.run,
                cursor: i,
            });
        }
    }

    let mut emitted = 0u64;
    while let Some(top) = heap.pop() {
        let cursor = &mut cursors[top.cursor];
        emit(cursor.record())?;
        emitted += 1;
        cursor.pos += 1;
        if cursor.pos < cursor.len {
            let next = cursor.key();
            if next < top.key {
                return Err(Error::DataIntegrity(format!(
                    "merge input from run {} is out of order at record {}",
                    cursor.run, cursor.pos
                )));
            }
            heap.push(HeapEntry {
                key: next,
                run: cursor.run,
                cursor: top.cursor,
            });
        }
    }
    Ok(emitted)
}
