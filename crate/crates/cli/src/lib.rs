//! Config-driven experiment runner: parses JSON configs, dispatches to the
//! classical and PINN solvers, and writes reports, tables and field grids.

pub mod config;
pub mod run;
pub mod sweep;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, ProblemKind};
pub use run::{resolve_output_dir, run_experiment, strip_timing, RunStatus, RunSummary, OUTPUT_ROOT_ENV};
pub use sweep::{parse_axis, sweep};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID_CONFIG: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
}
