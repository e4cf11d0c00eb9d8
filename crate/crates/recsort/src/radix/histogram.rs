//! Per-level bucket census. One radix level looks at a single key octet, so
//! every histogram has 256 buckets.

use std::ops::Range;

use crate::record::{KeyRef, KEY_LEN};

pub const RADIX: usize = 256;

/// Bucket counts for one radix level plus their exclusive prefix sums, which
/// are the scatter destinations.
#[derive(Clone)]
pub struct BucketLayout {
    pub counts: [usize; RADIX],
    pub offsets: [usize; RADIX],
}

impl BucketLayout {
    pub fn from_counts(counts: [usize; RADIX]) -> Self {
        let mut offsets = [0usize; RADIX];
        let mut sum = 0usize;
        for (offset, &count) in offsets.iter_mut().zip(counts.iter()) {
            *offset = sum;
            sum += count;
        }
        BucketLayout { counts, offsets }
    }

    /// Total number of keys histogrammed.
    pub fn total(&self) -> usize {
        self.offsets[RADIX - 1] + self.counts[RADIX - 1]
    }

    /// The destination range of bucket `b`.
    pub fn bucket_range(&self, b: usize) -> Range<usize> {
        self.offsets[b]..self.offsets[b] + self.counts[b]
    }

    /// 257 split points: bucket `b` occupies `boundaries[b]..boundaries[b+1]`.
    pub fn boundaries(&self) -> [usize; RADIX + 1] {
        let mut out = [0usize; RADIX + 1];
        out[..RADIX].copy_from_slice(&self.offsets);
        out[RADIX] = self.total();
        out
    }
}

/// Counts keys by their octet at `depth`.
pub fn build_histogram(span: &[KeyRef], depth: usize) -> BucketLayout {
    assert!(depth < KEY_LEN, "radix depth {depth} out of range");
    BucketLayout::from_counts(count_octets(span, depth))
}

pub(crate) fn count_octets(span: &[KeyRef], depth: usize) -> [usize; RADIX] {
    let mut counts = [0usize; RADIX];
    for kr in span {
        counts[kr.byte_at(depth) as usize] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mix::Splitmix;
    use crate::record::Key;

    fn keyref(key: Key) -> KeyRef {
        KeyRef { key, ordinal: 0 }
    }

    fn pad(s: &str) -> Key {
        let mut k = [0u8; KEY_LEN];
        k[..s.len()].copy_from_slice(s.as_bytes());
        k
    }

    #[test]
    fn five_keys_fill_four_buckets() {
        let span: Vec<KeyRef> = ["abc", "bcd", "cde", "cfe", "dfg"]
            .iter()
            .map(|s| keyref(pad(s)))
            .collect();
        let layout = build_histogram(&span, 0);
        assert_eq!(layout.counts[b'a' as usize], 1);
        assert_eq!(layout.counts[b'b' as usize], 1);
        assert_eq!(layout.counts[b'c' as usize], 2);
        assert_eq!(layout.counts[b'd' as usize], 1);
        let non_empty = layout.counts.iter().filter(|&&c| c > 0).count();
        assert_eq!(non_empty, 4);
        assert_eq!(layout.total(), 5);
    }

    #[test]
    fn empty_span_is_all_zero() {
        let layout = build_histogram(&[], 0);
        assert!(layout.counts.iter().all(|&c| c == 0));
        assert!(layout.offsets.iter().all(|&o| o == 0));
        assert_eq!(layout.total(), 0);
    }

    #[test]
    fn matches_naive_tally_on_random_keys() {
        let mut rng = Splitmix::keyed(0xca11, 0);
        let span: Vec<KeyRef> = (0..10_000)
            .map(|i| {
                let mut key = [0u8; KEY_LEN];
                rng.fill_bytes(&mut key);
                KeyRef { key, ordinal: i }
            })
            .collect();
        let depth = 3;
        let layout = build_histogram(&span, depth);
        // Naive per-key tally, written independently of count_octets.
        let mut naive = vec![0usize; RADIX];
        for kr in &span {
            naive[kr.key[depth] as usize] += 1;
        }
        assert_eq!(&layout.counts[..], &naive[..]);
        // Offsets are the exclusive prefix sum.
        let mut running = 0usize;
        for b in 0..RADIX {
            assert_eq!(layout.offsets[b], running);
            running += layout.counts[b];
        }
        assert_eq!(running, span.len());
    }

    #[test]
    fn boundaries_tile_the_span() {
        let mut rng = Splitmix::keyed(0xb0b, 0);
        let span: Vec<KeyRef> = (0..513)
            .map(|i| {
                let mut key = [0u8; KEY_LEN];
                rng.fill_bytes(&mut key);
                KeyRef { key, ordinal: i }
            })
            .collect();
        let layout = build_histogram(&span, 0);
        let bounds = layout.boundaries();
        assert_eq!(bounds[0], 0);
        assert_eq!(bounds[RADIX], span.len());
        for b in 0..RADIX {
            assert_eq!(bounds[b + 1] - bounds[b], layout.counts[b]);
        }
    }
}
