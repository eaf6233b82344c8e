//! Criterion benchmarks for the weakmeas kernels; see `benches/`.
