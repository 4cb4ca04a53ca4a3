//! Benchmark problem builders: max-cut and subspace clustering.

pub mod maxcut;
pub mod ssc;
