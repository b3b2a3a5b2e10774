//! Criterion benchmarks for `marketlag-core`; see `benches/`.
