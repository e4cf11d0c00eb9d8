//! Budgeted buffer pool with counted leases.
//!
//! Every byte buffer the pipelines hold for more than a moment comes from
//! here, so the pool's accounting is the memory story of the whole artifact:
//! outstanding bytes can never exceed the budget. Regions are handed out at
//! 4 KiB granularity, aligned to 4 KiB (which also satisfies direct I/O),
//! and returned the instant their lease count reaches zero so the operating
//! system can reclaim pages for its own caching.
//!
//! A request that cannot be satisfied blocks until other leases are
//! released; a watchdog turns starvation into a loud error instead of a
//! silent hang.

use std::alloc::{alloc_zeroed, dealloc, Layout};
use std::ptr::NonNull;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Allocation granularity and alignment of pool regions.
pub const BLOCK: usize = 4096;

const DEFAULT_WATCHDOG: Duration = Duration::from_secs(60);

#[derive(Debug)]
struct PoolState {
    outstanding: usize,
    peak: usize,
}

#[derive(Debug)]
struct PoolInner {
    budget: usize,
    watchdog: Duration,
    state: Mutex<PoolState>,
    freed: Condvar,
}

impl PoolInner {
    fn credit(&self, bytes: usize) {
        let mut state = self.state.lock().unwrap();
        debug_assert!(state.outstanding >= bytes);
        state.outstanding -= bytes;
        drop(state);
        self.freed.notify_all();
    }
}

/// Shared handle to one pool; cloning shares budget and accounting.
#[derive(Clone)]
pub struct BufferPool {
    inner: Arc<PoolInner>,
}

impl BufferPool {
    pub fn new(budget: usize) -> Self {
        Self::with_watchdog(budget, DEFAULT_WATCHDOG)
    }

    pub fn with_watchdog(budget: usize, watchdog: Duration) -> Self {
        BufferPool {
            inner: Arc::new(PoolInner {
                budget,
                watchdog,
                state: Mutex::new(PoolState {
                    outstanding: 0,
                    peak: 0,
                }),
                freed: Condvar::new(),
            }),
        }
    }

    /// Leases a region of `ceil(size / 4096) * 4096` bytes with a lease
    /// count of one. Blocks while the budget is exhausted; gives up with an
    /// error after the watchdog interval.
    pub fn lease(&self, size: usize) -> Result<BufferLease> {
        assert!(size > 0, "lease size must be positive");
        let rounded = size.div_ceil(BLOCK) * BLOCK;
        if rounded > self.inner.budget {
            return Err(Error::BudgetExceeded {
                requested: rounded,
                budget: self.inner.budget,
            });
        }
        let start = Instant::now();
        let mut state = self.inner.state.lock().unwrap();
        while state.outstanding + rounded > self.inner.budget {
            let waited = start.elapsed();
            if waited >= self.inner.watchdog {
                return Err(Error::BudgetExhausted {
                    requested: rounded,
                    waited,
                    outstanding: state.outstanding,
                    budget: self.inner.budget,
                });
            }
            let (guard, _timeout) = self
                .inner
                .freed
                .wait_timeout(state, self.inner.watchdog - waited)
                .unwrap();
            state = guard;
        }
        state.outstanding += rounded;
        state.peak = state.peak.max(state.outstanding);
        drop(state);

        Ok(BufferLease {
            pool: Arc::clone(&self.inner),
            buf: AlignedBuf::zeroed(rounded),
            rounded,
            count: AtomicUsize::new(1),
            credited: AtomicBool::new(false),
        })
    }

    pub fn budget(&self) -> usize {
        self.inner.budget
    }

    /// Bytes currently leased out.
    pub fn outstanding(&self) -> usize {
        self.inner.state.lock().unwrap().outstanding
    }

    /// High-water mark of outstanding bytes over the pool's lifetime.
    pub fn peak(&self) -> usize {
        self.inner.state.lock().unwrap().peak
    }
}

/// One leased region. The region stays checked out while the lease count is
/// positive: `retain` admits another holder, `release` drops one, and the
/// pool is credited the moment the count reaches zero.
#[derive(Debug)]
pub struct BufferLease {
    pool: Arc<PoolInner>,
    buf: AlignedBuf,
    rounded: usize,
    count: AtomicUsize,
    credited: AtomicBool,
}

impl BufferLease {
    /// Region length (the rounded-up lease size).
    pub fn len(&self) -> usize {
        self.rounded
    }

    pub fn is_empty(&self) -> bool {
        self.rounded == 0
    }

    pub fn lease_count(&self) -> usize {
        self.count.load(Ordering::Acquire)
    }

    pub fn as_slice(&self) -> &[u8] {
        assert!(self.lease_count() > 0, "read from a fully released lease");
        unsafe { std::slice::from_raw_parts(self.buf.ptr.as_ptr(), self.rounded) }
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        assert!(
            self.lease_count() == 1,
            "mutable access to a shared or released lease"
        );
        unsafe { std::slice::from_raw_parts_mut(self.buf.ptr.as_ptr(), self.rounded) }
    }

    /// Admits one more holder; returns the updated count.
    pub fn retain(&self) -> usize {
        let prev = self.count.fetch_add(1, Ordering::AcqRel);
        assert!(prev > 0, "retain on a fully released lease");
        prev + 1
    }

    /// Drops one holder; at zero the region returns to the pool. Returns the
    /// updated count.
    pub fn release(&self) -> Result<usize> {
        let mut current = self.count.load(Ordering::Acquire);
        loop {
            if current == 0 {
                return Err(Error::InternalInvariant(
                    "lease released below zero".into(),
                ));
            }
            match self.count.compare_exchange_weak(
                current,
                current - 1,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => break,
                Err(seen) => current = seen,
            }
        }
        let remaining = current - 1;
        if remaining == 0 && !self.credited.swap(true, Ordering::AcqRel) {
            self.pool.credit(self.rounded);
        }
        Ok(remaining)
    }
}

impl Drop for BufferLease {
    fn drop(&mut self) {
        // Holders that vanish without releasing (panic unwinding, early
        // returns) must still give the bytes back.
        if !self.credited.swap(true, Ordering::AcqRel) {
            self.pool.credit(self.rounded);
        }
    }
}

#[derive(Debug)]
struct AlignedBuf {
    ptr: NonNull<u8>,
    layout: Layout,
}

unsafe impl Send for AlignedBuf {}
unsafe impl Sync for AlignedBuf {}

impl AlignedBuf {
    fn zeroed(size: usize) -> Self {
        let layout = Layout::from_size_align(size, BLOCK).expect("valid layout");
        let ptr = unsafe { alloc_zeroed(layout) };
        let ptr = NonNull::new(ptr).unwrap_or_else(|| std::alloc::handle_alloc_error(layout));
        AlignedBuf { ptr, layout }
    }
}

impl Drop for AlignedBuf {
    fn drop(&mut self) {
        unsafe { dealloc(self.ptr.as_ptr(), self.layout) };
    }
}
