//! Output sinks.
//!
//! Two strategies with one contract (after finalize, the file holds exactly
//! the bytes submitted):
//!
//! * **Mapped** — the target is pre-sized to its final length and memory
//!   mapped, so any number of workers can scatter disjoint ranges straight
//!   into the page cache. The fit for in-memory outputs.
//! * **Streamed** — buffered sequential appends through a single writer, for
//!   outputs larger than memory. Offsets must arrive in order.
//!
//! Finalize always asks the platform for durability; the fire-and-forget
//! page-cache mode is deliberately not offered.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::ptr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use memmap2::MmapMut;

use crate::error::{Error, Result};
use crate::par::SendPtr;

const STREAM_BUFFER: usize = 512 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkMode {
    Mapped,
    Streamed,
}

pub struct WriteSink {
    path: PathBuf,
    written: AtomicU64,
    inner: SinkInner,
}

enum SinkInner {
    Mapped {
        file: File,
        // Kept alive for the raw writes; flushed in finalize.
        map: Option<MmapMut>,
        base: Option<SendPtr<u8>>,
        final_len: u64,
    },
    Streamed {
        writer: Mutex<BufWriter<File>>,
    },
}

impl WriteSink {
    /// Opens a mapped sink pre-sized to `final_len` bytes. Disjoint-range
    /// writes may come from any number of threads.
    pub fn mapped(path: impl AsRef<Path>, final_len: u64) -> Result<Self> {
        let path = path.as_ref();
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path)
            .map_err(|e| Error::io("cannot create", path, e))?;
        file.set_len(final_len)
            .map_err(|e| Error::io("cannot size", path, e))?;
        let (map, base) = if final_len == 0 {
            (None, None)
        } else {
            let mut map = unsafe { MmapMut::map_mut(&file) }
                .map_err(|e| Error::io("cannot map", path, e))?;
            let base = SendPtr::new(map.as_mut_ptr());
            (Some(map), Some(base))
        };
        Ok(WriteSink {
            path: path.to_path_buf(),
            written: AtomicU64::new(0),
            inner: SinkInner::Mapped {
                file,
                map,
                base,
                final_len,
            },
        })
    }

    /// Opens a streaming sink; writes must arrive in offset order.
    pub fn streamed(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io("cannot create", path, e))?;
        Ok(WriteSink {
            path: path.to_path_buf(),
            written: AtomicU64::new(0),
            inner: SinkInner::Streamed {
                writer: Mutex::new(BufWriter::with_capacity(STREAM_BUFFER, file)),
            },
        })
    }

    pub fn mode(&self) -> SinkMode {
        match self.inner {
            SinkInner::Mapped { .. } => SinkMode::Mapped,
            SinkInner::Streamed { .. } => SinkMode::Streamed,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn bytes_written(&self) -> u64 {
        self.written.load(Ordering::Acquire)
    }

    /// Makes `data` visible at `offset`. Mapped sinks accept concurrent
    /// writers on disjoint ranges; streamed sinks serialize appends and
    /// require `offset` to equal the bytes written so far.
    pub fn write_at(&self, offset: u64, data: &[u8]) -> Result<()> {
        if data.is_empty() {
            return Ok(());
        }
        match &self.inner {
            SinkInner::Mapped {
                base, final_len, ..
            } => {
                let end = offset
                    .checked_add(data.len() as u64)
                    .filter(|&end| end <= *final_len)
                    .ok_or_else(|| {
                        Error::Usage(format!(
                            "mapped write of {} bytes at offset {offset} exceeds the \
                             pre-sized length of {final_len} bytes",
                            data.len()
                        ))
                    })?;
                let _ = end;
                let base = base.expect("non-empty mapped sink has a mapping");
                // Safety: range-checked above; callers guarantee concurrent
                // writes target disjoint ranges.
                unsafe {
                    ptr::copy_nonoverlapping(
                        data.as_ptr(),
                        base.get().add(offset as usize),
                        data.len(),
                    );
                }
                self.written.fetch_add(data.len() as u64, Ordering::AcqRel);
                Ok(())
            }
            SinkInner::Streamed { writer } => {
                let mut writer = writer.lock().unwrap();
                let expected = self.written.load(Ordering::Acquire);
                if offset != expected {
                    return Err(Error::Usage(format!(
                        "streamed sink expects offset {expected}, got {offset}"
                    )));
                }
                writer
                    .write_all(data)
                    .map_err(|e| Error::io("cannot write", &self.path, e))?;
                self.written.fetch_add(data.len() as u64, Ordering::AcqRel);
                Ok(())
            }
        }
    }

    /// Flushes, requests durability, and returns the final file length.
    pub fn finalize(self) -> Result<u64> {
        let written = self.bytes_written();
        match self.inner {
            SinkInner::Mapped {
                file,
                map,
                final_len,
                ..
            } => {
                if written != final_len {
                    return Err(Error::InternalInvariant(format!(
                        "mapped sink finalized with {written} of {final_len} bytes submitted"
                    )));
                }
                if let Some(map) = map {
                    map.flush()
                        .map_err(|e| Error::io("cannot flush", &self.path, e))?;
                }
                file.sync_all()
                    .map_err(|e| Error::io("cannot sync", &self.path, e))?;
                Ok(final_len)
            }
            SinkInner::Streamed { writer } => {
                let mut writer = writer.into_inner().unwrap();
                writer
                    .flush()
                    .map_err(|e| Error::io("cannot flush", &self.path, e))?;
                let file = writer.into_inner().map_err(|e| {
                    Error::io("cannot flush", &self.path, e.into_error())
                })?;
                file.sync_all()
                    .map_err(|e| Error::io("cannot sync", &self.path, e))?;
                let len = file
                    .metadata()
                    .map_err(|e| Error::io("cannot stat", &self.path, e))?
                    .len();
                if len != written {
                    return Err(Error::InternalInvariant(format!(
                        "streamed sink wrote {written} bytes but the file holds {len}"
                    )));
                }
                Ok(len)
            }
        }
    }
}
