//! Criterion benchmarks for `kvbeam`; see `benches/`.
