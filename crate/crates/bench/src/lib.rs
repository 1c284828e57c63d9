//! Benchmarks live in `benches/`; run with `cargo bench -p qpu-stencil-bench`.
