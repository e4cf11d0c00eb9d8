//! Small helpers for partitioning work across scoped worker threads.

use std::ops::Range;
use std::sync::Mutex;

use crate::error::{Error, Result};

/// Keeps the first error any worker hit; later ones are dropped.
#[derive(Default)]
pub(crate) struct FirstError {
    slot: Mutex<Option<Error>>,
}

impl FirstError {
    pub(crate) fn record(&self, e: Error) {
        self.slot.lock().unwrap().get_or_insert(e);
    }

    pub(crate) fn is_set(&self) -> bool {
        self.slot.lock().unwrap().is_some()
    }

    pub(crate) fn into_result(self) -> Result<()> {
        match self.slot.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Raw-pointer wrapper that lets scoped workers write disjoint ranges of one
/// buffer. The caller owns the proof that the ranges handed to different
/// workers never overlap.
#[derive(Clone, Copy)]
pub(crate) struct SendPtr<T>(*mut T);

unsafe impl<T> Send for SendPtr<T> {}
unsafe impl<T> Sync for SendPtr<T> {}

impl<T> SendPtr<T> {
    pub(crate) fn new(ptr: *mut T) -> Self {
        SendPtr(ptr)
    }

    pub(crate) fn get(self) -> *mut T {
        self.0
    }
}

/// Splits `0..len` into at most `parts` contiguous near-equal ranges, never
/// producing an empty range.
pub(crate) fn split_even(len: usize, parts: usize) -> Vec<Range<usize>> {
    if len == 0 || parts == 0 {
        return Vec::new();
    }
    let parts = parts.min(len);
    let base = len / parts;
    let extra = len % parts;
    let mut ranges = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let size = base + usize::from(i < extra);
        ranges.push(start..start + size);
        start += size;
    }
    debug_assert_eq!(start, len);
    ranges
}
