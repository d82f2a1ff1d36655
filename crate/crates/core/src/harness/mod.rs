//! Experiment runner: simulated trials, suites over graph sizes and search
//! configurations, and the files they produce.

mod projection;
mod settings;
mod suite;
mod trial;

pub use projection::{emit_projection, ProjectionSummary};
pub use settings::BenchSettings;
pub use suite::{
    run_suite, trial_log_name, trial_seed, write_outputs, ResultRow, ResultsTable, SuiteOptions, SuiteResult,
    CSV_HEADER,
};
pub use trial::{is_optimal, run_trial, weight_to_destination, TrialRecord, TrialTiming, EXTRA_STEPS};
