//! End-to-end experiment orchestration: configuration, repeated seeded
//! runs over a dataset, external score ingestion, aggregation into the
//! audit's tables, and report emission.

pub mod config;
pub mod report;
pub mod runner;
pub mod scores;
pub mod tables;

pub use config::{BuiltinMethod, ExperimentConfig, MethodSpec, SplitSpec, Surface};
pub use report::{
    aggregate, collect_results, emit_report, read_results_file, write_comparison,
    write_correlation, write_results, AggregateTables, ReportFormat, RESULTS_FILE,
};
pub use runner::{run_experiment, run_experiment_with, MethodColumn, RunRecord, RunResults};
pub use scores::{load_scores, to_prediction_sets, write_scores, ScoreSet};
pub use tables::{
    compare_methods, correlation_matrix, effect_table, frequency_table, Comparison,
    CorrelationMatrix, EffectTable, FrequencyCell, FrequencyTable, WtlRow,
};
