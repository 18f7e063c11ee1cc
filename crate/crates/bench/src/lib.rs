//! Criterion benchmarks for `teamstab-core`; see `benches/`.
