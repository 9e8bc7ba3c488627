//! Criterion benchmarks for the scoring engine live under `benches/`.
