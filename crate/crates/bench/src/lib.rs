//! Benchmarks for the simulation engine live in `benches/`.
