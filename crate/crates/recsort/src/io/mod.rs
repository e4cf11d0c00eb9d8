//! I/O engine: budgeted buffer pool, chunked positional parallel reads, and
//! the two write-sink strategies.

pub mod pool;
pub mod read;
pub mod sink;

pub use pool::{BufferLease, BufferPool, BLOCK};
pub use read::{
    parallel_read, read_span_into, record_scan_chunk, DirectIo, ReadChunk, SourceFile,
    DEFAULT_CHUNK_SIZE,
};
pub use sink::{SinkMode, WriteSink};
