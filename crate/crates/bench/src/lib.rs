//! Criterion benchmarks for the resgrad kernels live in `benches/`.
