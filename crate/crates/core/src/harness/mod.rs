//! Configuration, sweeps, reporting and the command-line front end.

mod cli;
mod config;
mod pipeline;
mod sweep;

pub use cli::{cli_dispatch, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
pub use config::{DimRule, ExperimentConfig, NuChoice, Task};
pub use pipeline::{
    default_recovery_bias, effective_nu, run_diagnostic, run_recovery, run_representation,
    DiagReport, RecOutcome, RecReport, RecSettings, RepOutcome, RepReport, RepSettings,
};
pub use sweep::{
    emit_results, run_sweep, spread, summarize, ResultRecord, Spread, SummaryEntry, RESULTS_FILE,
    RESULT_COLUMNS, SUMMARY_FILE, TIMINGS_FILE, TIMING_COLUMNS,
};
