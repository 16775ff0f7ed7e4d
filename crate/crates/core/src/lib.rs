//! Mining git histories into co-editing and contribution networks, dating
//! Code Review bot adoption from workflow files, and the statistics for
//! before/after and matched comparisons of network metrics.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, which is what the pipeline uses.

pub mod actions;
pub mod fixture;
pub mod ingest;
pub mod metrics;
pub mod networks;
pub mod provenance;
pub mod scalar;
pub mod stats;
pub mod study;

pub type MetricVector = metrics::MetricVector<f64>;
pub type BipartiteMetricVector = metrics::BipartiteMetricVector<f64>;
pub type TestResult = stats::TestResult<f64>;
pub type PlaceboDistribution = stats::PlaceboDistribution<f64>;
