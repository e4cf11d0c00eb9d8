//! Deterministic 64-bit mixing primitives shared by the multiset checksum
//! and the data generator. The byte streams derived from these functions are
//! a compatibility contract (generated files must stay bit-identical across
//! releases), so the mixers are written out here instead of borrowing from a
//! random-number crate.

pub(crate) const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer: a cheap full-avalanche permutation of u64.
#[inline]
pub(crate) fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// splitmix64 stream keyed by (seed, lane). Two streams with different lanes
/// are independent, which lets callers derive one stream per record.
pub(crate) struct Splitmix {
    state: u64,
}

impl Splitmix {
    pub(crate) fn keyed(seed: u64, lane: u64) -> Self {
        Splitmix {
            state: mix64(seed ^ mix64(lane.wrapping_mul(GOLDEN_GAMMA).wrapping_add(GOLDEN_GAMMA))),
        }
    }

    #[inline]
    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Fills `out` with the next bytes of the stream (little-endian word order).
    pub(crate) fn fill_bytes(&mut self, out: &mut [u8]) {
        let mut chunks = out.chunks_exact_mut(8);
        for chunk in chunks.by_ref() {
            chunk.copy_from_slice(&self.next_u64().to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let word = self.next_u64().to_le_bytes();
            rem.copy_from_slice(&word[..rem.len()]);
        }
    }
}
