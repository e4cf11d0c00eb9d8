//! Adaptive parallel MSD radix sort over key references.
//!
//! The sort proceeds level by level through the 10 key octets, most
//! significant first. Each level histograms a span, scatters it into the
//! other of two ping-pong buffers grouped by the octet at that level, and
//! then dispatches every bucket by size:
//!
//! * buckets above the big threshold recurse immediately with multi-worker
//!   histogram and scatter, keeping all workers on the hot span;
//! * everything else becomes a task on a shared queue that a pool of
//!   workers drains single-threadedly, which load-balances the long tail of
//!   small buckets across workers;
//! * once a span falls below the tiny threshold it is finished with a
//!   comparison sort on the remaining key suffix, and recursion always stops
//!   at the last octet.
//!
//! Buffer discipline: data for a span at depth `d` lives in the primary
//! buffer when `d` is even and in the auxiliary buffer when odd; whichever
//! step finishes a span copies it back to the primary buffer if it ended on
//! the odd side.

pub mod histogram;
mod queue;
pub mod scatter;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::thread;

pub use histogram::{build_histogram, BucketLayout, RADIX};
pub use scatter::{scatter, scatter_buffered, Boundaries};

use crate::error::{Error, Result};
use crate::par::SendPtr;
use crate::record::{KeyRef, KEY_LEN};
use queue::{SortTask, TaskQueue};
use scatter::histogram_and_scatter_parallel;

/// Spans shorter than this are not worth fanning out to threads even on the
/// wide path; a one-worker parallel scatter is exactly a sequential scatter.
const MIN_WIDE_SLICE: usize = 8 * 1024;

/// Tuning knobs of the radix kernel.
#[derive(Debug, Clone)]
pub struct RadixConfig {
    /// Buckets strictly larger than this recurse with all workers instead of
    /// queueing. `None` picks `max(n / (8 * worker_count), 65536)` at sort
    /// time, which keeps the wide path saturated without starving the queue.
    pub big_bucket_threshold: Option<usize>,
    /// Spans strictly smaller than this finish with a comparison sort.
    pub tiny_bucket_threshold: usize,
    pub worker_count: usize,
    /// Keys staged per bucket per worker before a batched flush.
    pub scatter_buffer_capacity: usize,
}

impl Default for RadixConfig {
    fn default() -> Self {
        RadixConfig {
            big_bucket_threshold: None,
            tiny_bucket_threshold: 64,
            worker_count: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            scatter_buffer_capacity: 16,
        }
    }
}

impl RadixConfig {
    pub fn with_workers(worker_count: usize) -> Self {
        RadixConfig {
            worker_count,
            ..RadixConfig::default()
        }
    }

    pub(crate) fn effective_big_threshold(&self, n: usize) -> usize {
        self.big_bucket_threshold
            .unwrap_or_else(|| (n / (8 * self.worker_count)).max(65_536))
    }

    /// Strict validation for configuration taken from the outside world. The
    /// kernel itself tolerates any threshold combination (degenerate
    /// settings are useful for testing), but user-supplied thresholds must
    /// be ordered.
    pub fn validate(&self) -> Result<()> {
        if self.worker_count == 0 {
            return Err(Error::InvalidConfig("worker count must be at least 1".into()));
        }
        if self.scatter_buffer_capacity == 0 {
            return Err(Error::InvalidConfig(
                "scatter buffer capacity must be at least 1".into(),
            ));
        }
        if let Some(big) = self.big_bucket_threshold {
            if self.tiny_bucket_threshold >= big {
                return Err(Error::InvalidConfig(format!(
                    "tiny bucket threshold {} must be below big bucket threshold {}",
                    self.tiny_bucket_threshold, big
                )));
            }
        }
        Ok(())
    }
}

/// Counters describing one sort execution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SortStats {
    /// Spans finished by the comparison fallback.
    pub comparison_sorts: u64,
    /// Tasks drained from the small-bucket queue.
    pub tasks_processed: u64,
    /// Multi-worker histogram+scatter passes on the wide path.
    pub wide_scatters: u64,
    /// Deepest radix level any queued task ran at (the level after it never
    /// exceeds 10).
    pub max_task_depth: usize,
}

#[derive(Default)]
struct AtomicStats {
    comparison_sorts: AtomicU64,
    tasks_processed: AtomicU64,
    wide_scatters: AtomicU64,
    max_task_depth: AtomicUsize,
}

impl AtomicStats {
    fn note_task(&self, depth: usize) {
        self.tasks_processed.fetch_add(1, Ordering::Relaxed);
        self.max_task_depth.fetch_max(depth, Ordering::Relaxed);
    }

    fn snapshot(&self) -> SortStats {
        SortStats {
            comparison_sorts: self.comparison_sorts.load(Ordering::Relaxed),
            tasks_processed: self.tasks_processed.load(Ordering::Relaxed),
            wide_scatters: self.wide_scatters.load(Ordering::Relaxed),
            max_task_depth: self.max_task_depth.load(Ordering::Relaxed),
        }
    }
}

/// Ping-pong buffer pair. Workers carve disjoint spans out of both buffers;
/// disjointness is guaranteed by the bucket layouts (each task owns one
/// bucket range and buckets never overlap).
struct SortBuffers {
    primary: SendPtr<KeyRef>,
    aux: SendPtr<KeyRef>,
    len: usize,
}

impl SortBuffers {
    /// # Safety
    /// Callers must hold the unique claim on `start..start + len` of the
    /// chosen buffer; the radix driver guarantees this by handing every
    /// worker disjoint bucket ranges.
    unsafe fn span(&self, in_aux: bool, start: usize, len: usize) -> &mut [KeyRef] {
        debug_assert!(start + len <= self.len);
        let base = if in_aux { self.aux } else { self.primary };
        std::slice::from_raw_parts_mut(base.get().add(start), len)
    }
}

#[inline]
fn in_aux(depth: usize) -> bool {
    depth % 2 == 1
}

/// Sorts the key suffix from `depth` onward with the standard unstable
/// comparison sort. Callers guarantee all keys in the span agree on octets
/// below `depth`.
pub fn comparison_sort_fallback(span: &mut [KeyRef], depth: usize) {
    debug_assert!(depth <= KEY_LEN);
    span.sort_unstable_by(|a, b| a.key[depth..].cmp(&b.key[depth..]));
}

/// Sorts `keyrefs` by key in place. Blocking: fans out to
/// `config.worker_count` workers internally and joins them before
/// returning. Equal-key order is unspecified.
pub fn msd_radix_sort(keyrefs: &mut [KeyRef], config: &RadixConfig) -> SortStats {
    assert!(config.worker_count >= 1, "worker count must be at least 1");
    assert!(
        config.scatter_buffer_capacity >= 1,
        "scatter buffer capacity must be at least 1"
    );
    let stats = AtomicStats::default();
    let n = keyrefs.len();
    if n <= 1 {
        return stats.snapshot();
    }

    let mut aux = vec![KeyRef::default(); n];
    let bufs = SortBuffers {
        primary: SendPtr::new(keyrefs.as_mut_ptr()),
        aux: SendPtr::new(aux.as_mut_ptr()),
        len: n,
    };
    let queue = TaskQueue::new();
    let big = config.effective_big_threshold(n);

    // Wide phase: descend the spine of oversized buckets with every worker,
    // accumulating the small-bucket tail on the queue.
    sort_wide(&bufs, 0, n, 0, big, config, &queue, &stats);

    // Queue phase: drain the tail.
    let pending = queue.len();
    if pending > 0 {
        let workers = config.worker_count.min(pending);
        if workers <= 1 {
            small_bucket_worker(&bufs, &queue, config, &stats);
        } else {
            thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(|| small_bucket_worker(&bufs, &queue, config, &stats));
                }
            });
        }
    }
    stats.snapshot()
}

/// Ensures a finished span's data rests in the primary buffer.
fn finalize_span(bufs: &SortBuffers, start: usize, len: usize, depth: usize) {
    if len == 0 || !in_aux(depth) {
        return;
    }
    // Safety: the caller owns this span; aux and primary never alias.
    unsafe {
        let src = bufs.span(true, start, len);
        let dst = bufs.span(false, start, len);
        dst.copy_from_slice(src);
    }
}

#[allow(clippy::too_many_arguments)]
fn sort_wide(
    bufs: &SortBuffers,
    start: usize,
    len: usize,
    depth: usize,
    big: usize,
    config: &RadixConfig,
    queue: &TaskQueue,
    stats: &AtomicStats,
) {
    if len <= 1 || depth == KEY_LEN {
        finalize_span(bufs, start, len, depth);
        return;
    }
    let layout = {
        // Safety: the wide path processes one span at a time; no queue
        // worker is running yet, so the claim on this span is unique.
        let src = unsafe { bufs.span(in_aux(depth), start, len) };
        let dst = unsafe { bufs.span(in_aux(depth + 1), start, len) };
        let workers = (len / MIN_WIDE_SLICE).clamp(1, config.worker_count);
        if workers <= 1 {
            let layout = build_histogram(src, depth);
            scatter(src, &layout, depth, dst).expect("layout was built from this span");
            layout
        } else {
            stats.wide_scatters.fetch_add(1, Ordering::Relaxed);
            let (layout, _) = histogram_and_scatter_parallel(
                src,
                depth,
                dst,
                workers,
                config.scatter_buffer_capacity,
            );
            layout
        }
    };

    let child_depth = depth + 1;
    for b in 0..RADIX {
        let clen = layout.counts[b];
        if clen == 0 {
            continue;
        }
        let cstart = start + layout.offsets[b];
        if clen <= 1 || child_depth == KEY_LEN {
            finalize_span(bufs, cstart, clen, child_depth);
        } else if clen > big {
            sort_wide(bufs, cstart, clen, child_depth, big, config, queue, stats);
        } else {
            queue.push(SortTask {
                start: cstart,
                len: clen,
                depth: child_depth,
            });
        }
    }
}

/// Drains the shared queue until no task is queued or in flight anywhere.
fn small_bucket_worker(
    bufs: &SortBuffers,
    queue: &TaskQueue,
    config: &RadixConfig,
    stats: &AtomicStats,
) {
    while let Some(task) = queue.next() {
        process_task(bufs, task, config, queue, stats);
        queue.complete();
    }
}

fn process_task(
    bufs: &SortBuffers,
    task: SortTask,
    config: &RadixConfig,
    queue: &TaskQueue,
    stats: &AtomicStats,
) {
    let SortTask { start, len, depth } = task;
    debug_assert!(len >= 2 && depth < KEY_LEN);
    stats.note_task(depth);

    // Safety throughout: each task owns one bucket range; ranges of distinct
    // tasks never overlap, and children tile their parent exactly.
    if len < config.tiny_bucket_threshold {
        {
            let span = unsafe { bufs.span(in_aux(depth), start, len) };
            comparison_sort_fallback(span, depth);
        }
        stats.comparison_sorts.fetch_add(1, Ordering::Relaxed);
        finalize_span(bufs, start, len, depth);
        return;
    }

    let layout = {
        let src = unsafe { bufs.span(in_aux(depth), start, len) };
        let dst = unsafe { bufs.span(in_aux(depth + 1), start, len) };
        let layout = build_histogram(src, depth);
        scatter(src, &layout, depth, dst).expect("layout was built from this span");
        layout
    };

    let child_depth = depth + 1;
    for b in 0..RADIX {
        let clen = layout.counts[b];
        if clen == 0 {
            continue;
        }
        let cstart = start + layout.offsets[b];
        if clen <= 1 || child_depth == KEY_LEN {
            finalize_span(bufs, cstart, clen, child_depth);
        } else if clen < config.tiny_bucket_threshold {
            {
                let span = unsafe { bufs.span(in_aux(child_depth), cstart, clen) };
                comparison_sort_fallback(span, child_depth);
            }
            stats.comparison_sorts.fetch_add(1, Ordering::Relaxed);
            finalize_span(bufs, cstart, clen, child_depth);
        } else {
            queue.push(SortTask {
                start: cstart,
                len: clen,
                depth: child_depth,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mix::Splitmix;
    use crate::record::Key;
    use proptest::prelude::*;

    fn pad(s: &str) -> Key {
        let mut k = [0u8; KEY_LEN];
        k[..s.len()].copy_from_slice(s.as_bytes());
        k
    }

    fn uniform_span(n: usize, seed: u64) -> Vec<KeyRef> {
        let mut rng = Splitmix::keyed(seed, 0);
        (0..n)
            .map(|i| {
                let mut key = [0u8; KEY_LEN];
                rng.fill_bytes(&mut key);
                KeyRef {
                    key,
                    ordinal: i as u64,
                }
            })
            .collect()
    }

    /// Heavy first-octet skew plus a small alphabet, so buckets are lopsided
    /// and duplicate keys are common.
    fn skewed_span(n: usize, seed: u64) -> Vec<KeyRef> {
        let mut rng = Splitmix::keyed(seed, 1);
        (0..n)
            .map(|i| {
                let mut key = [0u8; KEY_LEN];
                rng.fill_bytes(&mut key);
                key[0] = if rng.next_u64() % 4 > 0 { 7 } else { key[0] % 13 };
                for b in key.iter_mut().skip(1) {
                    *b %= 4;
                }
                KeyRef {
                    key,
                    ordinal: i as u64,
                }
            })
            .collect()
    }

    fn assert_oracle_equal(mut input: Vec<KeyRef>, config: &RadixConfig) {
        let mut oracle = input.clone();
        oracle.sort_by(|a, b| a.key.cmp(&b.key));
        let before: Vec<(Key, u64)> = {
            let mut v: Vec<_> = input.iter().map(|k| (k.key, k.ordinal)).collect();
            v.sort_unstable();
            v
        };
        msd_radix_sort(&mut input, config);
        // Key sequence equals the comparison oracle's.
        let got: Vec<Key> = input.iter().map(|k| k.key).collect();
        let want: Vec<Key> = oracle.iter().map(|k| k.key).collect();
        assert_eq!(got, want);
        // Permutation: the (key, ordinal) multiset is preserved.
        let mut after: Vec<(Key, u64)> = input.iter().map(|k| (k.key, k.ordinal)).collect();
        after.sort_unstable();
        assert_eq!(before, after);
    }

    #[test]
    fn degenerate_sizes() {
        let config = RadixConfig::with_workers(2);
        let mut empty: Vec<KeyRef> = Vec::new();
        msd_radix_sort(&mut empty, &config);
        assert!(empty.is_empty());

        let mut one = vec![KeyRef {
            key: pad("zzz"),
            ordinal: 3,
        }];
        msd_radix_sort(&mut one, &config);
        assert_eq!(one[0].key, pad("zzz"));
        assert_eq!(one[0].ordinal, 3);
    }

    #[test]
    fn five_key_example_sorts() {
        let mut span: Vec<KeyRef> = ["cde", "abc", "dfg", "cfe", "bcd"]
            .iter()
            .enumerate()
            .map(|(i, s)| KeyRef {
                key: pad(s),
                ordinal: i as u64,
            })
            .collect();
        msd_radix_sort(&mut span, &RadixConfig::with_workers(1));
        let keys: Vec<Key> = span.iter().map(|k| k.key).collect();
        assert_eq!(
            keys,
            vec![pad("abc"), pad("bcd"), pad("cde"), pad("cfe"), pad("dfg")]
        );
    }

    #[test]
    fn uniform_matches_comparison_oracle() {
        assert_oracle_equal(uniform_span(100_000, 11), &RadixConfig::with_workers(4));
    }

    #[test]
    fn skewed_matches_comparison_oracle() {
        assert_oracle_equal(skewed_span(100_000, 12), &RadixConfig::with_workers(4));
    }

    #[test]
    fn forced_wide_recursion_matches_oracle() {
        // Everything recurses on the wide path; the queue is never used.
        let config = RadixConfig {
            big_bucket_threshold: Some(0),
            ..RadixConfig::with_workers(4)
        };
        assert_oracle_equal(uniform_span(50_000, 13), &config);
        assert_oracle_equal(skewed_span(50_000, 14), &config);
    }

    #[test]
    fn forced_comparison_fallback_matches_oracle() {
        // One histogram at the top, then comparison sort for every bucket.
        let config = RadixConfig {
            big_bucket_threshold: Some(usize::MAX),
            tiny_bucket_threshold: usize::MAX,
            ..RadixConfig::with_workers(4)
        };
        assert_oracle_equal(uniform_span(50_000, 15), &config);
        assert_oracle_equal(skewed_span(50_000, 16), &config);
    }

    #[test]
    fn identical_keys_descend_to_the_last_octet_untouched() {
        let key = pad("same");
        let mut span: Vec<KeyRef> = (0..1000)
            .map(|i| KeyRef { key, ordinal: i })
            .collect();
        let stats = msd_radix_sort(&mut span, &RadixConfig::with_workers(2));
        // Order of an all-equal span survives the full descent.
        for (i, kr) in span.iter().enumerate() {
            assert_eq!(kr.key, key);
            assert_eq!(kr.ordinal, i as u64);
        }
        // The descent reaches the deepest level and stops there: one task
        // per level from 1 through 9, no comparison sorts.
        assert_eq!(stats.max_task_depth, KEY_LEN - 1);
        assert_eq!(stats.tasks_processed, (KEY_LEN - 1) as u64);
        assert_eq!(stats.comparison_sorts, 0);
    }

    #[test]
    fn worker_counts_agree() {
        let input = uniform_span(60_000, 17);
        let mut one = input.clone();
        let mut eight = input;
        msd_radix_sort(&mut one, &RadixConfig::with_workers(1));
        msd_radix_sort(&mut eight, &RadixConfig::with_workers(8));
        assert_eq!(one, eight);
    }

    #[test]
    fn tiny_task_is_one_comparison_sort_without_requeue() {
        let mut span = uniform_span(32, 18);
        let n = span.len();
        let mut aux = vec![KeyRef::default(); n];
        let bufs = SortBuffers {
            primary: SendPtr::new(span.as_mut_ptr()),
            aux: SendPtr::new(aux.as_mut_ptr()),
            len: n,
        };
        let queue = TaskQueue::new();
        queue.push(SortTask {
            start: 0,
            len: n,
            depth: 2,
        });
        let config = RadixConfig {
            tiny_bucket_threshold: 64,
            ..RadixConfig::with_workers(1)
        };
        let stats = AtomicStats::default();
        small_bucket_worker(&bufs, &queue, &config, &stats);
        let snap = stats.snapshot();
        assert_eq!(snap.comparison_sorts, 1);
        assert_eq!(snap.tasks_processed, 1);
        assert_eq!(queue.len(), 0);
        // Data ended in the primary buffer, sorted from depth 2 on.
        for pair in span.windows(2) {
            assert!(pair[0].key[2..] <= pair[1].key[2..]);
        }
    }

    #[test]
    fn comparison_fallback_basics() {
        let mut single = vec![KeyRef {
            key: pad("a"),
            ordinal: 9,
        }];
        comparison_sort_fallback(&mut single, 0);
        assert_eq!(single[0].ordinal, 9);

        // Equal suffixes: key sequence unchanged, any ordinal order allowed.
        let key = pad("ffff");
        let mut equal: Vec<KeyRef> = (0..10).map(|i| KeyRef { key, ordinal: i }).collect();
        comparison_sort_fallback(&mut equal, 2);
        assert!(equal.iter().all(|kr| kr.key == key));

        // Random spans match a full-key oracle once prefixes agree.
        let mut rng = Splitmix::keyed(77, 0);
        for depth in [0usize, 3, 9] {
            let prefix: Vec<u8> = (0..depth).map(|_| (rng.next_u64() % 256) as u8).collect();
            let mut span: Vec<KeyRef> = (0..500)
                .map(|i| {
                    let mut key = [0u8; KEY_LEN];
                    rng.fill_bytes(&mut key);
                    key[..depth].copy_from_slice(&prefix);
                    KeyRef { key, ordinal: i }
                })
                .collect();
            let mut oracle = span.clone();
            oracle.sort_by(|a, b| a.key.cmp(&b.key));
            comparison_sort_fallback(&mut span, depth);
            let got: Vec<Key> = span.iter().map(|k| k.key).collect();
            let want: Vec<Key> = oracle.iter().map(|k| k.key).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn validate_rejects_unordered_thresholds() {
        let bad = RadixConfig {
            big_bucket_threshold: Some(32),
            tiny_bucket_threshold: 64,
            ..RadixConfig::with_workers(1)
        };
        assert!(bad.validate().is_err());
        assert!(RadixConfig::default().validate().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sort_preserves_multiset_and_orders_keys(
            seed: u64,
            n in 0usize..1200,
            workers in 1usize..5,
            small_alphabet: bool,
        ) {
            let mut span = if small_alphabet {
                skewed_span(n, seed)
            } else {
                uniform_span(n, seed)
            };
            let mut before: Vec<(Key, u64)> = span.iter().map(|k| (k.key, k.ordinal)).collect();
            before.sort_unstable();
            let config = RadixConfig {
                tiny_bucket_threshold: 8,
                big_bucket_threshold: Some(200),
                worker_count: workers,
                scatter_buffer_capacity: 4,
            };
            msd_radix_sort(&mut span, &config);
            for pair in span.windows(2) {
                prop_assert!(pair[0].key <= pair[1].key);
            }
            let mut after: Vec<(Key, u64)> = span.iter().map(|k| (k.key, k.ordinal)).collect();
            after.sort_unstable();
            prop_assert_eq!(before, after);
        }
    }
}
