//! Criterion benchmarks for the determiner pipeline, in `benches/`.
//!
//! Run with `cargo bench -p detgram-bench`.
