//! Benchmarks only; see `benches/geometry.rs`.
