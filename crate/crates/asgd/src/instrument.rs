//! Thread-local coordinate-touch accounting.
//!
//! Every sparse kernel and every dense sweep reports how many vector
//! coordinates it read or wrote, so tests can assert per-step cost bounds
//! (e.g. that a trainer step stays O(nnz) after averaging starts).

use std::cell::Cell;

thread_local! {
    static TOUCHES: Cell<u64> = const { Cell::new(0) };
}

pub fn add_touches(n: usize) {
    TOUCHES.with(|c| c.set(c.get() + n as u64));
}

pub fn reset_touches() {
    TOUCHES.with(|c| c.set(0));
}

/// Coordinates touched on this thread since the last reset.
pub fn touches() -> u64 {
    TOUCHES.with(|c| c.get())
}
