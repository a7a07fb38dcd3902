//! Criterion benchmarks for the Leggett simulator live under `benches/`.
