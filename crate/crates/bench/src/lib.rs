//! Benchmark-only crate; see `benches/sim_benches.rs`.
