//! Per-thread floating point operation tallies.
//!
//! Every dense kernel in [`crate::linalg`] adds an analytic operation count
//! for the call it just made. Callers that want the cost of a computation
//! wrap it in [`measure`]; nested measurements propagate outward so an outer
//! scope always sees the full cost of its inner scopes.

use std::cell::Cell;

thread_local! {
    static TALLY: Cell<u64> = const { Cell::new(0) };
}

/// Adds `n` operations to the current thread's tally.
pub fn add(n: u64) {
    TALLY.with(|t| t.set(t.get().saturating_add(n)));
}

/// Current running tally of the calling thread.
pub fn current() -> u64 {
    TALLY.with(|t| t.get())
}

/// Runs `f` and returns its result together with the operations it performed.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = TALLY.with(|t| t.replace(0));
    let out = f();
    let spent = TALLY.with(|t| t.get());
    TALLY.with(|t| t.set(before.saturating_add(spent)));
    (out, spent)
}

pub(crate) fn matmul(m: usize, k: usize, n: usize) -> u64 {
    2 * (m as u64) * (k as u64) * (n as u64)
}

/// Golub-Reinsch SVD on an `m x n` matrix with `m >= n`.
pub(crate) fn svd(m: usize, n: usize, with_u: bool, with_v: bool) -> u64 {
    let (m, n) = (m.max(n) as u64, m.min(n) as u64);
    match (with_u, with_v) {
        (false, false) => 4 * m * n * n - 4 * n * n * n / 3,
        (false, true) => 4 * m * n * n + 8 * n * n * n,
        (true, _) => 14 * m * n * n + 8 * n * n * n,
    }
}

/// Householder QR producing only the triangular factor.
pub(crate) fn qr(m: usize, n: usize) -> u64 {
    let (m, n) = (m as u64, n as u64);
    let k = m.min(n);
    (2 * m * n * k).saturating_sub(2 * k * k * k / 3)
}

/// Real Schur form plus eigenvector extraction for an `n x n` matrix.
pub(crate) fn eig(n: usize) -> u64 {
    25 * (n as u64).pow(3)
}
