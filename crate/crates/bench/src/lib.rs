//! Criterion benchmarks for the radar chain, the networks and the
//! estimators; see `benches/pipeline.rs`.
