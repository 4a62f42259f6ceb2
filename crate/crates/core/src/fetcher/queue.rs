use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use thiserror::Error;

use crate::tweetio::UserId;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("fetch queue is full ({cap} users)")]
pub struct QueueFull {
    pub cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enqueued {
    Added,
    /// Already queued; its priority was raised if the new one is higher.
    Coalesced,
}

struct Inner {
    // stale heap items are skipped on pop by comparing with `live`
    heap: BinaryHeap<(u32, Reverse<u64>, UserId)>,
    live: HashMap<UserId, (u32, u64)>,
    seq: u64,
    closed: bool,
}

/// Coalescing priority queue of users to fetch, ordered by priority then arrival.
pub struct FetchQueue {
    cap: usize,
    inner: Mutex<Inner>,
    ready: Condvar,
}

impl FetchQueue {
    pub fn new(cap: usize) -> Self {
        FetchQueue {
            cap,
            inner: Mutex::new(Inner { heap: BinaryHeap::new(), live: HashMap::new(), seq: 0, closed: false }),
            ready: Condvar::new(),
        }
    }

    pub fn unbounded() -> Self {
        Self::new(usize::MAX)
    }

    pub fn enqueue(&self, user: UserId, priority: u32) -> Result<Enqueued, QueueFull> {
        let mut q = self.inner.lock();
        if let Some(&(p, seq)) = q.live.get(&user) {
            if priority > p {
                q.live.insert(user, (priority, seq));
                q.heap.push((priority, Reverse(seq), user));
            }
            return Ok(Enqueued::Coalesced);
        }
        if q.live.len() >= self.cap {
            return Err(QueueFull { cap: self.cap });
        }
        let seq = q.seq;
        q.seq += 1;
        q.live.insert(user, (priority, seq));
        q.heap.push((priority, Reverse(seq), user));
        drop(q);
        self.ready.notify_one();
        Ok(Enqueued::Added)
    }

    /// Raises the priority of a user that is still queued; returns false otherwise.
    pub fn raise(&self, user: UserId, priority: u32) -> bool {
        let mut q = self.inner.lock();
        match q.live.get(&user) {
            Some(&(p, seq)) => {
                if priority > p {
                    q.live.insert(user, (priority, seq));
                    q.heap.push((priority, Reverse(seq), user));
                }
                true
            }
            None => false,
        }
    }

    fn pop_locked(q: &mut Inner) -> Option<(UserId, u32)> {
        while let Some((p, Reverse(seq), user)) = q.heap.pop() {
            if q.live.get(&user) == Some(&(p, seq)) {
                q.live.remove(&user);
                return Some((user, p));
            }
        }
        None
    }

    pub fn try_pop(&self) -> Option<(UserId, u32)> {
        Self::pop_locked(&mut self.inner.lock())
    }

    /// Waits for an entry. `None` once the queue is closed and drained.
    pub fn pop(&self) -> Option<(UserId, u32)> {
        let mut q = self.inner.lock();
        loop {
            if let Some(e) = Self::pop_locked(&mut q) {
                return Some(e);
            }
            if q.closed {
                return None;
            }
            self.ready.wait(&mut q);
        }
    }

    pub fn pop_timeout(&self, timeout: Duration) -> Option<(UserId, u32)> {
        let mut q = self.inner.lock();
        if let Some(e) = Self::pop_locked(&mut q) {
            return Some(e);
        }
        if !q.closed {
            self.ready.wait_for(&mut q, timeout);
        }
        Self::pop_locked(&mut q)
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.inner.lock().live.contains_key(&user)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wakes all waiters; `pop` returns `None` once drained.
    pub fn close(&self) {
        self.inner.lock().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.inner.lock().closed
    }
}
