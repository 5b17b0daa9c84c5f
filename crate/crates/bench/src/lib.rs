//! Criterion benchmarks for the pyrofield engines live in `benches/`.
