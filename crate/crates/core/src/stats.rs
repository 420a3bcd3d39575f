//! Instrumentation counters for the benchmark harness and the structural
//! scaling checks (max-flow invocations, recursion depth, sampling retries).

use std::sync::atomic::{AtomicU64, Ordering};

/// Shared counters. All methods are thread-safe; relaxed ordering is enough
/// because the counters are only read after the instrumented call returns.
#[derive(Debug, Default)]
pub struct Stats {
    flow_calls: AtomicU64,
    cut_threshold_calls: AtomicU64,
    retries_total: AtomicU64,
    max_retries_per_subproblem: AtomicU64,
    max_recursion_depth: AtomicU64,
}

impl Stats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count_flow(&self) {
        self.flow_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count_cut_threshold(&self) {
        self.cut_threshold_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count_retries(&self, attempts: u64) {
        self.retries_total.fetch_add(attempts, Ordering::Relaxed);
        self.max_retries_per_subproblem
            .fetch_max(attempts, Ordering::Relaxed);
    }

    pub fn record_depth(&self, depth: u64) {
        self.max_recursion_depth.fetch_max(depth, Ordering::Relaxed);
    }

    pub fn flow_calls(&self) -> u64 {
        self.flow_calls.load(Ordering::Relaxed)
    }

    pub fn cut_threshold_calls(&self) -> u64 {
        self.cut_threshold_calls.load(Ordering::Relaxed)
    }

    pub fn retries_total(&self) -> u64 {
        self.retries_total.load(Ordering::Relaxed)
    }

    pub fn max_retries_per_subproblem(&self) -> u64 {
        self.max_retries_per_subproblem.load(Ordering::Relaxed)
    }

    pub fn max_recursion_depth(&self) -> u64 {
        self.max_recursion_depth.load(Ordering::Relaxed)
    }
}
