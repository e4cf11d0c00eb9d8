//! The scatter pass: moving every key reference of a span into its bucket's
//! reserved range of the destination buffer.
//!
//! Scattering is where radix sort spends its time, and its memory access
//! pattern is a random walk over 256 write cursors. The buffered variants
//! stage keys in small per-worker, per-bucket arrays that fit in a private
//! CPU cache and flush them to the destination in batches.

// Indexed loops over the 256 buckets walk several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

use std::ptr;
use std::thread;

use super::histogram::{count_octets, BucketLayout, RADIX};
use super::RadixConfig;
use crate::error::{Error, Result};
use crate::par::{split_even, SendPtr};
use crate::record::KeyRef;

/// 257 split points; bucket `b` of the scattered output occupies
/// `boundaries[b]..boundaries[b + 1]`.
pub type Boundaries = [usize; RADIX + 1];

fn verify_layout(layout: &BucketLayout, span_len: usize) -> Result<()> {
    if layout.total() != span_len {
        return Err(Error::InternalInvariant(format!(
            "bucket layout describes {} keys but the span holds {span_len}",
            layout.total()
        )));
    }
    Ok(())
}

fn cursor_mismatch() -> Error {
    Error::InternalInvariant("bucket layout inconsistent with span contents".into())
}

/// Sequential scatter. Within each bucket the input order is preserved.
pub fn scatter(
    span: &[KeyRef],
    layout: &BucketLayout,
    depth: usize,
    dest: &mut [KeyRef],
) -> Result<Boundaries> {
    verify_layout(layout, span.len())?;
    assert!(dest.len() >= span.len(), "scatter destination too small");
    let mut cursors = layout.offsets;
    for kr in span {
        let b = kr.byte_at(depth) as usize;
        match dest.get_mut(cursors[b]) {
            Some(slot) => *slot = *kr,
            None => return Err(cursor_mismatch()),
        }
        cursors[b] += 1;
    }
    for b in 0..RADIX {
        if cursors[b] != layout.offsets[b] + layout.counts[b] {
            return Err(cursor_mismatch());
        }
    }
    Ok(layout.boundaries())
}

/// Cache-staged scatter. Identical per-bucket contents to [`scatter`]; with a
/// single worker the output is octet-for-octet identical. With several
/// workers each one scatters its slice of the span into bucket sub-ranges
/// reserved from the per-worker histograms, so buckets hold the workers'
/// contributions back to back.
pub fn scatter_buffered(
    span: &[KeyRef],
    layout: &BucketLayout,
    depth: usize,
    dest: &mut [KeyRef],
    config: &RadixConfig,
) -> Result<Boundaries> {
    verify_layout(layout, span.len())?;
    assert!(dest.len() >= span.len(), "scatter destination too small");
    assert!(config.scatter_buffer_capacity >= 1);
    if config.worker_count <= 1 {
        return scatter_staged_seq(span, layout, depth, dest, config.scatter_buffer_capacity);
    }
    let (computed, bounds) = histogram_and_scatter_parallel(
        span,
        depth,
        dest,
        config.worker_count,
        config.scatter_buffer_capacity,
    );
    if computed.counts != layout.counts {
        return Err(cursor_mismatch());
    }
    Ok(bounds)
}

fn scatter_staged_seq(
    span: &[KeyRef],
    layout: &BucketLayout,
    depth: usize,
    dest: &mut [KeyRef],
    capacity: usize,
) -> Result<Boundaries> {
    let mut staging = Staging::new(capacity);
    let mut cursors = layout.offsets;
    for kr in span {
        let b = kr.byte_at(depth) as usize;
        if let Some(batch) = staging.push(b, *kr) {
            flush_checked(dest, &mut cursors, b, batch)?;
        }
    }
    for b in 0..RADIX {
        if let Some(batch) = staging.take(b) {
            flush_checked(dest, &mut cursors, b, batch)?;
        }
    }
    for b in 0..RADIX {
        if cursors[b] != layout.offsets[b] + layout.counts[b] {
            return Err(cursor_mismatch());
        }
    }
    Ok(layout.boundaries())
}

fn flush_checked(
    dest: &mut [KeyRef],
    cursors: &mut [usize; RADIX],
    bucket: usize,
    batch: &[KeyRef],
) -> Result<()> {
    let start = cursors[bucket];
    match dest.get_mut(start..start + batch.len()) {
        Some(out) => out.copy_from_slice(batch),
        None => return Err(cursor_mismatch()),
    }
    cursors[bucket] = start + batch.len();
    Ok(())
}

/// One worker's staging area: `capacity` key slots per bucket.
struct Staging {
    slots: Vec<KeyRef>,
    fill: [u32; RADIX],
    capacity: usize,
}

impl Staging {
    fn new(capacity: usize) -> Self {
        Staging {
            slots: vec![KeyRef::default(); RADIX * capacity],
            fill: [0; RADIX],
            capacity,
        }
    }

    /// Stages one key; returns the full batch when the bucket's slots filled
    /// up, leaving the bucket empty again.
    #[inline]
    fn push(&mut self, bucket: usize, kr: KeyRef) -> Option<&[KeyRef]> {
        let fill = self.fill[bucket] as usize;
        self.slots[bucket * self.capacity + fill] = kr;
        if fill + 1 == self.capacity {
            self.fill[bucket] = 0;
            Some(&self.slots[bucket * self.capacity..][..self.capacity])
        } else {
            self.fill[bucket] = fill as u32 + 1;
            None
        }
    }

    /// Drains whatever is staged for `bucket`.
    fn take(&mut self, bucket: usize) -> Option<&[KeyRef]> {
        let fill = self.fill[bucket] as usize;
        if fill == 0 {
            return None;
        }
        self.fill[bucket] = 0;
        Some(&self.slots[bucket * self.capacity..][..fill])
    }
}

/// Parallel histogram plus staged scatter over one span: per-worker octet
/// counts over disjoint input slices, a reduction into the global layout,
/// then every worker scatters its slice into per-(worker, bucket) reserved
/// destination sub-ranges.
///
/// Used both by the public buffered scatter and by the sort driver's wide
/// path, which needs the layout it computes.
pub(crate) fn histogram_and_scatter_parallel(
    span: &[KeyRef],
    depth: usize,
    dest: &mut [KeyRef],
    workers: usize,
    capacity: usize,
) -> (BucketLayout, Boundaries) {
    assert!(dest.len() >= span.len());
    let ranges = split_even(span.len(), workers);
    if ranges.len() <= 1 {
        let layout = BucketLayout::from_counts(count_octets(span, depth));
        let bounds = scatter(span, &layout, depth, dest)
            .expect("layout was built from this span");
        return (layout, bounds);
    }

    let per_worker: Vec<[usize; RADIX]> = thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|r| {
                let slice = &span[r.clone()];
                s.spawn(move || count_octets(slice, depth))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut totals = [0usize; RADIX];
    for counts in &per_worker {
        for b in 0..RADIX {
            totals[b] += counts[b];
        }
    }
    let layout = BucketLayout::from_counts(totals);

    // Reserve bucket sub-ranges per worker: worker w's slot in bucket b
    // starts after the contributions of workers before it.
    let mut starts: Vec<[usize; RADIX]> = Vec::with_capacity(per_worker.len());
    let mut cursor = layout.offsets;
    for counts in &per_worker {
        starts.push(cursor);
        for b in 0..RADIX {
            cursor[b] += counts[b];
        }
    }

    let dst = SendPtr::new(dest.as_mut_ptr());
    thread::scope(|s| {
        for (range, start) in ranges.iter().zip(&starts) {
            let slice = &span[range.clone()];
            s.spawn(move || {
                // Safety: the (worker, bucket) destination ranges derived
                // from the per-worker histograms partition `dest`, so no two
                // workers touch the same slot.
                unsafe { staged_scatter_raw(slice, depth, *start, dst, capacity) }
            });
        }
    });

    let bounds = layout.boundaries();
    (layout, bounds)
}

/// Scatters `slice` through a staging area into raw destination cursors.
///
/// # Safety
/// `cursors[b] .. cursors[b] + count_of(slice, b)` must be valid, in-bounds
/// slots of the buffer behind `dst`, disjoint from every concurrent caller.
unsafe fn staged_scatter_raw(
    slice: &[KeyRef],
    depth: usize,
    mut cursors: [usize; RADIX],
    dst: SendPtr<KeyRef>,
    capacity: usize,
) {
    let mut staging = Staging::new(capacity);
    for kr in slice {
        let b = kr.byte_at(depth) as usize;
        if let Some(batch) = staging.push(b, *kr) {
            ptr::copy_nonoverlapping(batch.as_ptr(), dst.get().add(cursors[b]), batch.len());
            cursors[b] += batch.len();
        }
    }
    for b in 0..RADIX {
        if let Some(batch) = staging.take(b) {
            ptr::copy_nonoverlapping(batch.as_ptr(), dst.get().add(cursors[b]), batch.len());
            cursors[b] += batch.len();
        }
    }
}
