//! Benchmark toolkit comparing classical nonlinear filters with a learned
//! recurrent estimator on five nonlinear state-estimation scenarios.

pub mod bench;
pub mod datasets;
pub mod filters;
pub mod linalg;
pub mod metrics;
pub mod neural;
pub mod rng;
pub mod scenarios;
