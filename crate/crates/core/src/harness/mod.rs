//! Experiment orchestration: configuration, seeded runs of the calibration
//! loop, aggregation across repetitions, and CSV/manifest output.

mod config;
mod output;
mod run;
pub mod seeds;

pub use config::{ExperimentConfig, ExperimentSection, SelectionSection, WorldConfig, MarkerConfig, Experiment, ManifestSection};
pub use output::{emit_outputs, summary_rows, SummaryRow, METRIC_HEADER};
pub use run::{aggregate, run_single, run_suite, IterationRow, IterationStats, MethodAggregate, RunRecord, SuiteResult};
