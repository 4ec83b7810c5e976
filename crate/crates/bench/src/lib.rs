//! Criterion benchmarks for the solvers and the Monte Carlo engine; see `benches/`.
