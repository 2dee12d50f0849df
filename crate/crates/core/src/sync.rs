//! A small counting semaphore used to honour per-provider and per-backend
//! concurrency caps.

use std::sync::{Condvar, Mutex};

#[derive(Debug)]
pub struct ConcurrencyLimit {
    max: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

impl ConcurrencyLimit {
    /// `max == 0` is treated as 1.
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            in_use: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn max(&self) -> usize {
        self.max
    }

    /// Blocks until a slot is free. The slot is released when the guard drops.
    pub fn acquire(&self) -> Permit<'_> {
        let mut in_use = self.in_use.lock().expect("limit mutex poisoned");
        while *in_use >= self.max {
            in_use = self.freed.wait(in_use).expect("limit mutex poisoned");
        }
        *in_use += 1;
        Permit { limit: self }
    }

    pub fn in_use(&self) -> usize {
        *self.in_use.lock().expect("limit mutex poisoned")
    }
}

pub struct Permit<'a> {
    limit: &'a ConcurrencyLimit,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut in_use = self.limit.in_use.lock().expect("limit mutex poisoned");
        *in_use -= 1;
        self.limit.freed.notify_one();
    }
}
