//! Experiment harness for the reciprocal-alignment trainer: configuration,
//! seeded multi-run orchestration, metric/plot emission and the
//! verification suites behind the `rda` command-line tool.

pub mod comparison;
pub mod config;
pub mod csvio;
pub mod plots;
pub mod runner;
pub mod verify;

pub use comparison::{compare, Comparison};
pub use config::{ExperimentConfig, DEFAULT_SEEDS, OUT_ROOT_ENV};
pub use csvio::{metrics_to_csv, parse_metrics_csv, write_metrics_csv, ParsedMetrics};
pub use plots::emit_plots;
pub use runner::{mean_std, run_experiment, ExperimentOutput, ExperimentSummary};
pub use verify::{
    sample_dirichlet, snap_to_grid, verify_reverse, verify_theorem1, ReverseReport, TheoremReport,
};

/// Exit codes by failure category.
pub mod exit {
    pub const OK: i32 = 0;
    pub const GENERAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const ASSERTION: i32 = 4;
    pub const IO: i32 = 5;

    /// Maps a library error to its exit category.
    pub fn code_for(err: &rda_core::Error) -> i32 {
        use rda_core::Error;
        match err {
            Error::Config(_) | Error::Usage(_) | Error::Degenerate(_) | Error::Protocol(_) => {
                CONFIG
            }
            Error::Numerical(_) => NUMERICAL,
            Error::Io(_) | Error::Serde(_) => IO,
        }
    }
}
