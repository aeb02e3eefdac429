//! Seeded four-regime benchmark generation plus the metric and report
//! machinery used to compare methods on it.

mod generate;
mod metrics;
mod report;

pub use generate::{
    generate_benchmark, split_rng, Anchor, BenchmarkManifest, BenchmarkSpec, GammaPolicy, GenParams, ShiftTransform,
    DEFAULT_SEED, GENERATOR_VERSION,
};
pub use metrics::{aggregate_metrics, compute_regret, MethodOutcomes, MetricsRow, Regrets};
pub use report::{emit_report, failure_rows, FailureRow, ReportOptions, DEFAULT_REGRET_THRESHOLD};
