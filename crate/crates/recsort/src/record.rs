//! Fixed-layout 100-byte records and the key-reference form they are sorted
//! in.
//!
//! A record is exactly 100 octets: the first 10 are the sort key, the
//! remaining 90 an opaque payload. Ordering is unsigned lexicographic
//! comparison of the key bytes and nothing else. Sorting never moves whole
//! records until a final placement pass; it works on [`KeyRef`]s, each a key
//! copy paired with the record's ordinal position within its span.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::mix::{mix64, GOLDEN_GAMMA};

pub const RECORD_LEN: usize = 100;
pub const KEY_LEN: usize = 10;
pub const PAYLOAD_LEN: usize = RECORD_LEN - KEY_LEN;

/// A 10-octet sort key.
pub type Key = [u8; KEY_LEN];

/// One fixed 100-byte record: the key in bytes 0..10, an opaque payload in
/// bytes 10..100. Nothing but the key participates in ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(transparent)]
pub struct Record(pub [u8; RECORD_LEN]);

impl Record {
    pub fn key(&self) -> &Key {
        self.0[..KEY_LEN].try_into().unwrap()
    }

    pub fn payload(&self) -> &[u8] {
        &self.0[KEY_LEN..]
    }

    pub fn as_bytes(&self) -> &[u8; RECORD_LEN] {
        &self.0
    }
}

impl TryFrom<&[u8]> for Record {
    type Error = Error;

    fn try_from(bytes: &[u8]) -> Result<Record> {
        let arr: [u8; RECORD_LEN] = bytes.try_into().map_err(|_| {
            Error::MalformedInput(format!(
                "{} bytes is not one {RECORD_LEN}-byte record",
                bytes.len()
            ))
        })?;
        Ok(Record(arr))
    }
}

/// Unsigned lexicographic order on keys. Total: the first differing octet
/// decides, equal prefixes fall through to length (always equal here).
#[inline]
pub fn key_compare(a: &Key, b: &Key) -> Ordering {
    a.cmp(b)
}

/// A key copy plus the ordinal of the record it came from. 18 significant
/// bytes; the ordinal stands in for a machine address so that it stays valid
/// across buffers and processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KeyRef {
    pub key: Key,
    pub ordinal: u64,
}

impl KeyRef {
    #[inline]
    pub fn byte_at(&self, depth: usize) -> u8 {
        self.key[depth]
    }
}

fn check_span_len(len: usize) -> Result<usize> {
    let residue = len % RECORD_LEN;
    if residue != 0 {
        return Err(Error::MalformedInput(format!(
            "span of {len} bytes is not a whole number of {RECORD_LEN}-byte records \
             ({residue} bytes left over)"
        )));
    }
    Ok(len / RECORD_LEN)
}

/// Returns the key bytes of record `idx` within a contiguous record span.
#[inline]
pub fn key_at(span: &[u8], idx: usize) -> &Key {
    let start = idx * RECORD_LEN;
    span[start..start + KEY_LEN].try_into().unwrap()
}

/// Extracts one [`KeyRef`] per record of `span`, with ordinals starting at
/// `base_ordinal` in record order.
pub fn extract_keyrefs(span: &[u8], base_ordinal: u64) -> Result<Vec<KeyRef>> {
    let count = check_span_len(span.len())?;
    let mut out = Vec::with_capacity(count);
    fill_keyrefs(span, base_ordinal, &mut out);
    Ok(out)
}

/// As [`extract_keyrefs`], writing into a preallocated slice. `out` must hold
/// exactly one slot per record of `span`.
pub fn extract_keyrefs_into(span: &[u8], base_ordinal: u64, out: &mut [KeyRef]) -> Result<()> {
    let count = check_span_len(span.len())?;
    if out.len() != count {
        return Err(Error::InternalInvariant(format!(
            "keyref destination holds {} slots for {count} records",
            out.len()
        )));
    }
    for (i, (rec, slot)) in span.chunks_exact(RECORD_LEN).zip(out).enumerate() {
        slot.key = rec[..KEY_LEN].try_into().unwrap();
        slot.ordinal = base_ordinal + i as u64;
    }
    Ok(())
}

fn fill_keyrefs(span: &[u8], base_ordinal: u64, out: &mut Vec<KeyRef>) {
    for (i, rec) in span.chunks_exact(RECORD_LEN).enumerate() {
        out.push(KeyRef {
            key: rec[..KEY_LEN].try_into().unwrap(),
            ordinal: base_ordinal + i as u64,
        });
    }
}

/// Order-independent digest of a record multiset: the wrapping 128-bit sum of
/// one mixing hash per record. Permutation invariance is structural
/// (addition commutes); distinctness rests on the per-record hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MultisetChecksum(u128);

impl MultisetChecksum {
    pub const NEUTRAL: MultisetChecksum = MultisetChecksum(0);

    /// Folds one record into the accumulator.
    pub fn add(&mut self, record: &[u8]) -> Result<()> {
        if record.len() != RECORD_LEN {
            return Err(Error::MalformedInput(format!(
                "checksum input of {} bytes is not one {RECORD_LEN}-byte record",
                record.len()
            )));
        }
        self.0 = self.0.wrapping_add(record_digest(record));
        Ok(())
    }

    /// Folds every record of a contiguous span into the accumulator.
    pub fn add_span(&mut self, span: &[u8]) -> Result<()> {
        check_span_len(span.len())?;
        for rec in span.chunks_exact(RECORD_LEN) {
            self.0 = self.0.wrapping_add(record_digest(rec));
        }
        Ok(())
    }

    /// Merges two partial checksums; commutative and associative, so partial
    /// accumulators from concurrent workers combine in any order.
    pub fn combine(self, other: MultisetChecksum) -> MultisetChecksum {
        MultisetChecksum(self.0.wrapping_add(other.0))
    }

    pub fn value(self) -> u128 {
        self.0
    }
}

/// Digest of a stream of records; each item must be exactly one record.
pub fn multiset_checksum<'a, I>(records: I) -> Result<MultisetChecksum>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut acc = MultisetChecksum::NEUTRAL;
    for rec in records {
        acc.add(rec)?;
    }
    Ok(acc)
}

/// 128-bit mixing hash of one record. All 100 octets participate; a change
/// to any single octet avalanches through the chained mix.
fn record_digest(record: &[u8]) -> u128 {
    debug_assert_eq!(record.len(), RECORD_LEN);
    let mut lo: u64 = 0x243f_6a88_85a3_08d3;
    let mut hi: u64 = 0x1319_8a2e_0370_7344;
    let mut chunks = record.chunks_exact(8);
    let mut lane: u64 = 0;
    for chunk in chunks.by_ref() {
        let word = u64::from_le_bytes(chunk.try_into().unwrap());
        lane += 1;
        lo = mix64(lo ^ word.wrapping_add(lane.wrapping_mul(GOLDEN_GAMMA)));
        hi = mix64(hi ^ lo);
    }
    let rem = chunks.remainder();
    let mut tail = [0u8; 8];
    tail[..rem.len()].copy_from_slice(rem);
    let word = u64::from_le_bytes(tail);
    lane += 1;
    lo = mix64(lo ^ word.wrapping_add(lane.wrapping_mul(GOLDEN_GAMMA)));
    hi = mix64(hi ^ lo);
    ((hi as u128) << 64) | lo as u128
}
