//! Criterion benchmarks for the shooting, dense-oracle and descent engines;
//! see `benches/engines.rs`.
