//! Criterion benchmarks for `akt-core`; see `benches/`.
