//! Experiment configuration, single runs, sweeps, reports and paired tests.

mod config;
mod stats;
mod summary;
mod sweep;

pub use config::*;
pub use stats::{
    aggregate, aggregate_columns, hierarchy, mean_std, paired_sign_test, paired_wins, report, write_aggregate,
    AggregateRow, GroupKey, MetricStats, RankEntry, Report,
};
pub use summary::{
    audit, execute, read_rows, run, write_rows, AuditReport, RunFiles, RunSummary, SummaryRow, Timing, CSV_COLUMNS, METRIC_COLUMNS,
    SCHEMA_VERSION,
};
pub use sweep::{sweep, SweepAxes, SweepResult};
