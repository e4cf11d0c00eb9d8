//! recsort: an external-sorting toolkit for fixed-layout 100-byte records.
//!
//! The crate is organized around one in-memory kernel and the machinery that
//! feeds it:
//!
//! * [`record`] — the 100-byte record layout, 10-byte key ordering, key
//!   reference extraction, and the order-independent multiset checksum.
//! * [`radix`] — the adaptive parallel MSD radix sort over key references:
//!   histogram + cache-staged scatter per level, parallel recursion into
//!   oversized buckets, and a shared work queue that load-balances small
//!   buckets across workers with a comparison-sort fallback for tiny spans.
//! * [`io`] — chunked positional parallel reads (best-effort direct I/O), a
//!   budgeted 4 KiB-granular buffer pool with lease counting, and two write
//!   sinks: memory-mapped for pre-sized outputs, streaming for appends.
//! * [`pipeline`] — the adaptive driver: plans internal vs external
//!   execution from the memory budget, sorts in memory when everything
//!   fits, and otherwise forms sorted runs and K-way-merges key-range
//!   partitions with read/merge/write stages overlapped through bounded
//!   queues.
//! * [`genval`] — the deterministic dataset generator (uniform, skewed,
//!   ASCII framing) and the output validator (key order + multiset
//!   checksum).
//!
//! The `recsort` binary in the companion CLI crate fronts all of this with
//! `gen`, `sort`, `validate`, and `bench` subcommands.

pub mod error;
pub mod genval;
pub mod io;
mod mix;
mod par;
pub mod pipeline;
pub mod radix;
pub mod record;

pub use error::{Error, Result, Stage};
pub use record::{Key, KeyRef, MultisetChecksum, Record, KEY_LEN, RECORD_LEN};
