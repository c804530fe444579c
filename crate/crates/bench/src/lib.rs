//! Criterion benchmarks for the labelbridge kernels.
