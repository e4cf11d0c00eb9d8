//! Chunked positional parallel reads.
//!
//! Readers issue positional (`pread`-style) requests, so any number of them
//! can share one descriptor without seek coordination; chunks carry their
//! file offset and consumers place or order them as they see fit. Direct
//! I/O is requested best-effort: when the platform, filesystem, or an
//! unaligned request refuses it, the read silently falls back to the page
//! cache and the fallback is recorded for the benchmark report.

use std::fs::{File, OpenOptions};
use std::io;
use std::os::unix::fs::{FileExt, OpenOptionsExt};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;

use super::pool::{BufferLease, BufferPool};
use crate::error::{Error, Result};

/// Default read request size.
pub const DEFAULT_CHUNK_SIZE: usize = 256 * 1024;

/// Alignment direct I/O requires of offsets, lengths, and buffer addresses.
const DIRECT_ALIGN: usize = 512;

/// Chunk size rounding for record scans: a multiple of both the 100-byte
/// record and the 512-byte sector, so requests never split a record and stay
/// eligible for direct I/O.
pub fn record_scan_chunk(nominal: usize) -> usize {
    const ALIGN: usize = 12_800;
    (nominal / ALIGN * ALIGN).max(ALIGN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectIo {
    /// Request direct I/O; fall back (recorded) where refused.
    On,
    #[default]
    Off,
    /// Try direct I/O, fall back silently.
    Auto,
}

/// A readable input file, optionally doubled with a direct-I/O descriptor.
pub struct SourceFile {
    plain: File,
    direct: Option<File>,
    fallback: AtomicBool,
    path: PathBuf,
}

#[allow(clippy::len_without_is_empty)]
impl SourceFile {
    pub fn open(path: impl AsRef<Path>, mode: DirectIo) -> Result<Self> {
        let path = path.as_ref();
        let plain = File::open(path).map_err(|e| Error::io("cannot open", path, e))?;
        let (direct, fallback) = match mode {
            DirectIo::Off => (None, false),
            DirectIo::On | DirectIo::Auto => {
                match OpenOptions::new()
                    .read(true)
                    .custom_flags(libc::O_DIRECT)
                    .open(path)
                {
                    Ok(f) => (Some(f), false),
                    Err(_) => (None, true),
                }
            }
        };
        Ok(SourceFile {
            plain,
            direct,
            fallback: AtomicBool::new(fallback),
            path: path.to_path_buf(),
        })
    }

    pub fn len(&self) -> Result<u64> {
        self.plain
            .metadata()
            .map(|m| m.len())
            .map_err(|e| Error::io("cannot stat", &self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Whether any read so far was served from the page cache despite direct
    /// I/O being requested.
    pub fn used_fallback(&self) -> bool {
        self.fallback.load(Ordering::Relaxed)
    }

    /// Fills `buf` from `offset`, failing on a short read.
    pub fn read_exact_at(&self, buf: &mut [u8], offset: u64) -> Result<()> {
        if let Some(direct) = &self.direct {
            let aligned = offset.is_multiple_of(DIRECT_ALIGN as u64)
                && buf.len().is_multiple_of(DIRECT_ALIGN)
                && (buf.as_ptr() as usize).is_multiple_of(DIRECT_ALIGN);
            if aligned {
                match direct.read_exact_at(buf, offset) {
                    Ok(()) => return Ok(()),
                    Err(e) if e.raw_os_error() == Some(libc::EINVAL) => {
                        self.fallback.store(true, Ordering::Relaxed);
                    }
                    Err(e) => return Err(self.read_error(offset, e)),
                }
            } else {
                self.fallback.store(true, Ordering::Relaxed);
            }
        }
        self.plain
            .read_exact_at(buf, offset)
            .map_err(|e| self.read_error(offset, e))
    }

    fn read_error(&self, offset: u64, e: io::Error) -> Error {
        let context = if e.kind() == io::ErrorKind::UnexpectedEof {
            "short read from"
        } else {
            "cannot read"
        };
        Error::io(
            context,
            &self.path,
            io::Error::new(e.kind(), format!("offset {offset}: {e}")),
        )
    }
}

/// One delivered chunk: `len` bytes of file content starting at `offset`,
/// held in a pool lease that is released when the chunk is dropped.
pub struct ReadChunk {
    offset: u64,
    len: usize,
    lease: BufferLease,
}

impl ReadChunk {
    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn data(&self) -> &[u8] {
        &self.lease.as_slice()[..self.len]
    }

    pub fn into_lease(self) -> (u64, usize, BufferLease) {
        (self.offset, self.len, self.lease)
    }
}

/// Reads the whole file in `chunk_size` requests issued by `reader_count`
/// concurrent readers, delivering every chunk exactly once to `consumer`
/// (which may run concurrently and must be reentrant). Returns the total
/// bytes read, which equals the file length.
pub fn parallel_read<F>(
    path: impl AsRef<Path>,
    chunk_size: usize,
    reader_count: usize,
    mode: DirectIo,
    pool: &BufferPool,
    consumer: F,
) -> Result<u64>
where
    F: Fn(ReadChunk) -> Result<()> + Sync,
{
    if chunk_size == 0 {
        return Err(Error::InvalidConfig("chunk size must be positive".into()));
    }
    let src = SourceFile::open(path, mode)?;
    let total = src.len()?;
    if total == 0 {
        return Ok(0);
    }
    let chunk_count = total.div_ceil(chunk_size as u64);
    let readers = (reader_count.max(1) as u64).min(chunk_count) as usize;

    let next = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    thread::scope(|s| {
        for _ in 0..readers {
            s.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    return;
                }
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= chunk_count {
                    return;
                }
                let offset = index * chunk_size as u64;
                let len = (total - offset).min(chunk_size as u64) as usize;
                let outcome = (|| {
                    let mut lease = pool.lease(len)?;
                    src.read_exact_at(&mut lease.as_mut_slice()[..len], offset)?;
                    consumer(ReadChunk { offset, len, lease })
                })();
                if let Err(e) = outcome {
                    abort.store(true, Ordering::Relaxed);
                    failure.lock().unwrap().get_or_insert(e);
                    return;
                }
            });
        }
    });

    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Fills `buf` with file content starting at `file_offset`, splitting the
/// transfer into `chunk_size` requests spread over `readers` threads.
pub fn read_span_into(
    src: &SourceFile,
    file_offset: u64,
    buf: &mut [u8],
    chunk_size: usize,
    readers: usize,
) -> Result<()> {
    assert!(chunk_size > 0);
    if buf.is_empty() {
        return Ok(());
    }
    let readers = readers.max(1).min(buf.len().div_ceil(chunk_size));
    if readers <= 1 {
        let mut offset = file_offset;
        for piece in buf.chunks_mut(chunk_size) {
            src.read_exact_at(piece, offset)?;
            offset += piece.len() as u64;
        }
        return Ok(());
    }

    // Round-robin static assignment of chunks to readers.
    let mut per_reader: Vec<Vec<(u64, &mut [u8])>> = (0..readers).map(|_| Vec::new()).collect();
    let mut offset = file_offset;
    for (i, piece) in buf.chunks_mut(chunk_size).enumerate() {
        let len = piece.len() as u64;
        per_reader[i % readers].push((offset, piece));
        offset += len;
    }
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    thread::scope(|s| {
        for work in per_reader {
            s.spawn(|| {
                for (off, piece) in work {
                    if failure.lock().unwrap().is_some() {
                        return;
                    }
                    if let Err(e) = src.read_exact_at(piece, off) {
                        failure.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
