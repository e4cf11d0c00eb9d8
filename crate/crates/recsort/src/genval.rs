//! Deterministic dataset generator and output validator.
//!
//! Every record is a pure function of `(seed, ordinal)`, so generation is
//! byte-identical across runs and across worker counts, and any record can
//! be produced without its neighbours. The validator makes one streaming
//! pass and reports key order, the first violation, the record count, and
//! the multiset checksum.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::error::{Error, Result};
use crate::io::WriteSink;
use crate::mix::Splitmix;
use crate::par::split_even;
use crate::record::{key_compare, Key, MultisetChecksum, KEY_LEN, RECORD_LEN};

/// First and last printable octet of the ASCII record mode.
const ASCII_LO: u8 = 0x20;
const ASCII_SPAN: u64 = 95; // 0x20..=0x7e
/// ASCII records end in CR LF.
const ASCII_TAIL: [u8; 2] = [0x0d, 0x0a];

/// Zipf exponent of the skewed key model.
const ZIPF_EXPONENT: f64 = 1.0;

/// Records generated per work unit when generation is parallel.
const GEN_CHUNK_RECORDS: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Uniform,
    Skewed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Binary,
    Ascii,
}

/// A dataset recipe. Identical specs produce octet-identical files.
#[derive(Debug, Clone, Copy)]
pub struct GenSpec {
    pub record_count: u64,
    pub seed: u64,
    pub distribution: Distribution,
    pub encoding: Encoding,
}

impl GenSpec {
    pub fn file_len(&self) -> u64 {
        self.record_count * RECORD_LEN as u64
    }
}

/// Key-distribution tables, built once per generation pass.
///
/// The skewed model draws the first two key octets from a Zipf distribution
/// (exponent 1.0) over the octet alphabet and leaves the rest uniform; the
/// benchmark's original skew model is unpublished, so this stands in and is
/// echoed in reports.
pub struct KeyModel {
    spec: GenSpec,
    zipf_cdf: Option<Vec<f64>>,
}

impl KeyModel {
    pub fn new(spec: GenSpec) -> Self {
        let zipf_cdf = match spec.distribution {
            Distribution::Uniform => None,
            Distribution::Skewed => {
                let alphabet = match spec.encoding {
                    Encoding::Binary => 256usize,
                    Encoding::Ascii => ASCII_SPAN as usize,
                };
                let mut weights: Vec<f64> = (0..alphabet)
                    .map(|k| 1.0 / ((k + 1) as f64).powf(ZIPF_EXPONENT))
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                for w in &mut weights {
                    acc += *w / total;
                    *w = acc;
                }
                weights[alphabet - 1] = 1.0;
                Some(weights)
            }
        };
        KeyModel { spec, zipf_cdf }
    }

    pub fn spec(&self) -> &GenSpec {
        &self.spec
    }

    fn zipf_octet(&self, rng: &mut Splitmix) -> u8 {
        let cdf = self.zipf_cdf.as_ref().expect("skewed model");
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        idx as u8
    }

    /// The key of record `ordinal`.
    pub fn key(&self, ordinal: u64) -> Key {
        let mut rng = Splitmix::keyed(self.spec.seed, ordinal);
        let mut key = [0u8; KEY_LEN];
        self.fill_key(&mut rng, &mut key);
        key
    }

    fn fill_key(&self, rng: &mut Splitmix, key: &mut [u8; KEY_LEN]) {
        match (self.spec.distribution, self.spec.encoding) {
            (Distribution::Uniform, Encoding::Binary) => rng.fill_bytes(key),
            (Distribution::Uniform, Encoding::Ascii) => {
                for b in key.iter_mut() {
                    *b = ASCII_LO + (rng.next_u64() % ASCII_SPAN) as u8;
                }
            }
            (Distribution::Skewed, Encoding::Binary) => {
                key[0] = self.zipf_octet(rng);
                key[1] = self.zipf_octet(rng);
                rng.fill_bytes(&mut key[2..]);
            }
            (Distribution::Skewed, Encoding::Ascii) => {
                key[0] = ASCII_LO + self.zipf_octet(rng);
                key[1] = ASCII_LO + self.zipf_octet(rng);
                for b in key.iter_mut().skip(2) {
                    *b = ASCII_LO + (rng.next_u64() % ASCII_SPAN) as u8;
                }
            }
        }
    }

    /// The full 100-byte record `ordinal`.
    pub fn record(&self, ordinal: u64) -> [u8; RECORD_LEN] {
        let mut rng = Splitmix::keyed(self.spec.seed, ordinal);
        let mut rec = [0u8; RECORD_LEN];
        {
            let key: &mut [u8; KEY_LEN] = (&mut rec[..KEY_LEN]).try_into().unwrap();
            self.fill_key(&mut rng, key);
        }
        match self.spec.encoding {
            Encoding::Binary => rng.fill_bytes(&mut rec[KEY_LEN..]),
            Encoding::Ascii => {
                for b in rec[KEY_LEN..RECORD_LEN - 2].iter_mut() {
                    *b = ASCII_LO + (rng.next_u64() % ASCII_SPAN) as u8;
                }
                rec[RECORD_LEN - 2..].copy_from_slice(&ASCII_TAIL);
            }
        }
        rec
    }
}

/// Writes the dataset described by `spec` to `path`, returning the record
/// count. Generation may fan out to `threads` workers; the output bytes do
/// not depend on the worker count.
pub fn generate(spec: &GenSpec, path: impl AsRef<Path>, threads: usize) -> Result<u64> {
    let path = path.as_ref();
    let model = KeyModel::new(*spec);
    let sink = WriteSink::mapped(path, spec.file_len())?;
    let count = spec.record_count;
    if count == 0 {
        sink.finalize()?;
        return Ok(0);
    }

    let chunk_count = count.div_ceil(GEN_CHUNK_RECORDS);
    let workers = (threads.max(1) as u64).min(chunk_count) as usize;
    let next = AtomicU64::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                let mut block = Vec::with_capacity(GEN_CHUNK_RECORDS as usize * RECORD_LEN);
                loop {
                    let chunk = next.fetch_add(1, Ordering::Relaxed);
                    if chunk >= chunk_count || failure.lock().unwrap().is_some() {
                        return;
                    }
                    let first = chunk * GEN_CHUNK_RECORDS;
                    let last = (first + GEN_CHUNK_RECORDS).min(count);
                    block.clear();
                    for ordinal in first..last {
                        block.extend_from_slice(&model.record(ordinal));
                    }
                    if let Err(e) = sink.write_at(first * RECORD_LEN as u64, &block) {
                        failure.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    sink.finalize()?;
    Ok(count)
}

/// What one validation pass found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    pub ordered: bool,
    /// Smallest index `i` with `key[i] < key[i - 1]`, when unordered.
    pub first_violation: Option<u64>,
    pub record_count: u64,
    pub checksum: MultisetChecksum,
}

/// Streams `path` once, checking adjacent key order and accumulating the
/// multiset checksum.
pub fn validate(path: impl AsRef<Path>) -> Result<ValidationReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io("cannot open", path, e))?;
    let len = file
        .metadata()
        .map_err(|e| Error::io("cannot stat", path, e))?
        .len();
    if len % RECORD_LEN as u64 != 0 {
        return Err(Error::MalformedInput(format!(
            "file `{}` holds {len} bytes, not a whole number of {RECORD_LEN}-byte records \
             ({} bytes left over)",
            path.display(),
            len % RECORD_LEN as u64
        )));
    }

    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut buf = vec![0u8; RECORD_LEN * 10_240];
    let mut checksum = MultisetChecksum::NEUTRAL;
    let mut prev_key: Option<Key> = None;
    let mut ordered = true;
    let mut first_violation = None;
    let mut index: u64 = 0;
    let mut remaining = len;
    while remaining > 0 {
        let take = (buf.len() as u64).min(remaining) as usize;
        reader
            .read_exact(&mut buf[..take])
            .map_err(|e| Error::io("cannot read", path, e))?;
        for rec in buf[..take].chunks_exact(RECORD_LEN) {
            let key: Key = rec[..KEY_LEN].try_into().unwrap();
            if ordered {
                if let Some(prev) = prev_key {
                    if key_compare(&key, &prev) == std::cmp::Ordering::Less {
                        ordered = false;
                        first_violation = Some(index);
                    }
                }
            }
            checksum.add(rec)?;
            prev_key = Some(key);
            index += 1;
        }
        remaining -= take as u64;
    }

    Ok(ValidationReport {
        ordered,
        first_violation,
        record_count: index,
        checksum,
    })
}

/// Parallel checksum of a record buffer already in memory; used by tests and
/// the pipelines to cross-check outputs without a second file pass.
pub fn checksum_records(span: &[u8], threads: usize) -> Result<MultisetChecksum> {
    if !span.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::MalformedInput(format!(
            "span of {} bytes is not a whole number of records",
            span.len()
        )));
    }
    let records = span.len() / RECORD_LEN;
    let ranges = split_even(records, threads.max(1));
    if ranges.len() <= 1 {
        let mut acc = MultisetChecksum::NEUTRAL;
        acc.add_span(span)?;
        return Ok(acc);
    }
    let partials: Vec<MultisetChecksum> = thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|r| {
                let slice = &span[r.start * RECORD_LEN..r.end * RECORD_LEN];
                s.spawn(move || {
                    let mut acc = MultisetChecksum::NEUTRAL;
                    acc.add_span(slice).expect("whole records");
                    acc
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    Ok(partials
        .into_iter()
        .fold(MultisetChecksum::NEUTRAL, |a, b| a.combine(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn spec(count: u64, seed: u64, dist: Distribution, enc: Encoding) -> GenSpec {
        GenSpec {
            record_count: count,
            seed,
            distribution: dist,
            encoding: enc,
        }
    }

    #[test]
    fn zero_records_make_an_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.dat");
        let written = generate(
            &spec(0, 1, Distribution::Uniform, Encoding::Binary),
            &path,
            2,
        )
        .unwrap();
        assert_eq!(written, 0);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 0);
    }

    #[test]
    fn generation_is_deterministic_across_runs_and_threads() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(5_000, 42, Distribution::Uniform, Encoding::Binary);
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let c = dir.path().join("c");
        generate(&s, &a, 1).unwrap();
        generate(&s, &b, 1).unwrap();
        generate(&s, &c, 8).unwrap();
        let bytes_a = std::fs::read(&a).unwrap();
        assert_eq!(bytes_a, std::fs::read(&b).unwrap());
        assert_eq!(bytes_a, std::fs::read(&c).unwrap());
        assert_eq!(bytes_a.len(), 500_000);
    }

    #[test]
    fn different_seeds_differ() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        generate(&spec(100, 1, Distribution::Uniform, Encoding::Binary), &a, 1).unwrap();
        generate(&spec(100, 2, Distribution::Uniform, Encoding::Binary), &b, 1).unwrap();
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn ascii_records_are_printable_with_crlf_tails() {
        let dir = tempfile::tempdir().unwrap();
        for dist in [Distribution::Uniform, Distribution::Skewed] {
            let path = dir.path().join("ascii");
            generate(&spec(200, 7, dist, Encoding::Ascii), &path, 2).unwrap();
            let bytes = std::fs::read(&path).unwrap();
            for rec in bytes.chunks_exact(RECORD_LEN) {
                for &b in &rec[..RECORD_LEN - 2] {
                    assert!((0x20..=0x7e).contains(&b), "unprintable octet {b:#x}");
                }
                assert_eq!(&rec[RECORD_LEN - 2..], &ASCII_TAIL);
            }
        }
    }

    #[test]
    fn uniform_first_octet_bins_within_five_sigma() {
        // Smaller sibling of the acceptance check: n = 10^5.
        let n = 100_000u64;
        let model = KeyModel::new(spec(n, 9, Distribution::Uniform, Encoding::Binary));
        let mut bins = [0u64; 256];
        for i in 0..n {
            bins[model.key(i)[0] as usize] += 1;
        }
        let mean = n as f64 / 256.0;
        let sigma = (n as f64 * (1.0 / 256.0) * (255.0 / 256.0)).sqrt();
        for (b, &count) in bins.iter().enumerate() {
            let dev = (count as f64 - mean).abs();
            assert!(
                dev <= 5.0 * sigma,
                "bin {b} holds {count}, {dev:.1} from mean {mean:.1} (5σ = {:.1})",
                5.0 * sigma
            );
        }
    }

    #[test]
    fn skewed_first_octet_is_top_heavy() {
        let n = 50_000u64;
        let model = KeyModel::new(spec(n, 11, Distribution::Skewed, Encoding::Binary));
        let mut bins = [0u64; 256];
        for i in 0..n {
            bins[model.key(i)[0] as usize] += 1;
        }
        // Zipf(1.0) over 256 values puts roughly 1/H(256) ≈ 16% on octet 0.
        assert!(bins[0] as f64 > n as f64 * 0.10, "bin 0 = {}", bins[0]);
        assert!(bins[0] > bins[128] * 4);
    }

    #[test]
    fn validator_accepts_sorted_and_locates_swaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data");
        let s = spec(500, 3, Distribution::Uniform, Encoding::Binary);
        generate(&s, &path, 2).unwrap();

        // Sort the file records by key, write, validate.
        let bytes = std::fs::read(&path).unwrap();
        let mut records: Vec<&[u8]> = bytes.chunks_exact(RECORD_LEN).collect();
        records.sort_by(|a, b| a[..KEY_LEN].cmp(&b[..KEY_LEN]));
        let sorted_path = dir.path().join("sorted");
        let mut f = File::create(&sorted_path).unwrap();
        for r in &records {
            f.write_all(r).unwrap();
        }
        f.flush().unwrap();

        let report = validate(&sorted_path).unwrap();
        assert!(report.ordered);
        assert_eq!(report.first_violation, None);
        assert_eq!(report.record_count, 500);

        // Swap records 123 and 124; the violation is at index 124.
        let mut swapped = std::fs::read(&sorted_path).unwrap();
        let (a, b) = (123 * RECORD_LEN, 124 * RECORD_LEN);
        for i in 0..RECORD_LEN {
            swapped.swap(a + i, b + i);
        }
        let swapped_path = dir.path().join("swapped");
        std::fs::write(&swapped_path, &swapped).unwrap();
        let report2 = validate(&swapped_path).unwrap();
        assert!(!report2.ordered);
        assert_eq!(report2.first_violation, Some(124));
        // Same multiset, same checksum.
        assert_eq!(report2.checksum, report.checksum);
        assert_eq!(report2.record_count, report.record_count);
    }

    #[test]
    fn validator_rejects_torn_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("torn");
        std::fs::write(&path, vec![0u8; 250]).unwrap();
        let err = validate(&path).unwrap_err();
        assert!(err.to_string().contains("50"), "{err}");
    }

    #[test]
    fn validator_agrees_with_an_independent_adjacent_scan() {
        // Soundness: ordered == true exactly when every adjacent key pair is
        // non-decreasing, across sorted, shuffled, and constructed inputs.
        let dir = tempfile::tempdir().unwrap();
        let mut rng = crate::mix::Splitmix::keyed(99, 0);
        for case in 0..20 {
            let n = 1 + (rng.next_u64() % 400) as usize;
            let mut records: Vec<[u8; RECORD_LEN]> = (0..n)
                .map(|_| {
                    let mut rec = [0u8; RECORD_LEN];
                    rng.fill_bytes(&mut rec);
                    // Every third case: tiny key alphabet, lots of equal keys.
                    if case % 3 == 0 {
                        for b in rec[..KEY_LEN].iter_mut() {
                            *b %= 2;
                        }
                    }
                    rec
                })
                .collect();
            if case % 2 == 0 {
                records.sort_by(|a, b| a[..KEY_LEN].cmp(&b[..KEY_LEN]));
            }
            let path = dir.path().join(format!("case-{case}"));
            let bytes: Vec<u8> = records.iter().flatten().copied().collect();
            std::fs::write(&path, &bytes).unwrap();

            // Independent scan over adjacent pairs.
            let mut expect_ordered = true;
            let mut expect_first = None;
            for i in 1..n {
                if records[i][..KEY_LEN] < records[i - 1][..KEY_LEN] {
                    expect_ordered = false;
                    expect_first = Some(i as u64);
                    break;
                }
            }
            let report = validate(&path).unwrap();
            assert_eq!(report.ordered, expect_ordered, "case {case}");
            assert_eq!(report.first_violation, expect_first, "case {case}");
            assert_eq!(report.record_count, n as u64);
        }
    }

    #[test]
    fn parallel_checksum_matches_streaming() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sum");
        generate(
            &spec(1234, 5, Distribution::Skewed, Encoding::Binary),
            &path,
            2,
        )
        .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let streamed = validate(&path).unwrap().checksum;
        for threads in [1usize, 4] {
            assert_eq!(checksum_records(&bytes, threads).unwrap(), streamed);
        }
    }
}
