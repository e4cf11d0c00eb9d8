//! Shared queue of small-bucket sort tasks.
//!
//! Tasks spawn tasks (a drained bucket re-enqueues its own oversized
//! sub-buckets), so queue emptiness alone is not a termination signal. An
//! outstanding counter tracks queued plus in-flight tasks: it rises on
//! enqueue and falls only when a dequeued task completes. Workers exit when
//! it reaches zero.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

use crate::record::KEY_LEN;

/// One pending span: all key references in `start..start + len` share their
/// key octets at positions below `depth`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SortTask {
    pub start: usize,
    pub len: usize,
    pub depth: usize,
}

struct QueueState {
    tasks: VecDeque<SortTask>,
    outstanding: usize,
}

pub(crate) struct TaskQueue {
    state: Mutex<QueueState>,
    changed: Condvar,
}

impl TaskQueue {
    pub(crate) fn new() -> Self {
        TaskQueue {
            state: Mutex::new(QueueState {
                tasks: VecDeque::new(),
                outstanding: 0,
            }),
            changed: Condvar::new(),
        }
    }

    pub(crate) fn push(&self, task: SortTask) {
        debug_assert!(task.depth < KEY_LEN, "task enqueued at depth {}", task.depth);
        let mut state = self.state.lock().unwrap();
        state.outstanding += 1;
        state.tasks.push_back(task);
        drop(state);
        self.changed.notify_one();
    }

    /// Blocks for the next task; returns `None` once no task is queued and
    /// none is in flight anywhere.
    pub(crate) fn next(&self) -> Option<SortTask> {
        let mut state = self.state.lock().unwrap();
        loop {
            if let Some(task) = state.tasks.pop_front() {
                return Some(task);
            }
            if state.outstanding == 0 {
                return None;
            }
            state = self.changed.wait(state).unwrap();
        }
    }

    /// Marks a previously dequeued task as done.
    pub(crate) fn complete(&self) {
        let mut state = self.state.lock().unwrap();
        debug_assert!(state.outstanding > 0);
        state.outstanding -= 1;
        let done = state.outstanding == 0;
        drop(state);
        if done {
            // Wake every idle worker so all of them observe termination.
            self.changed.notify_all();
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.state.lock().unwrap().tasks.len()
    }
}
