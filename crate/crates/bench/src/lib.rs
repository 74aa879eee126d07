//! Criterion benchmarks for the capacity programs; see `benches/`.
