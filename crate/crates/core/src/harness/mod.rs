//! Run configuration, experiment drivers and file output.

pub mod config;
pub mod drivers;
pub mod emit;
pub mod metrics;

pub use config::{preset_hash, preset_source, Mode, Problem, Reference, RunConfig, PRESETS};
pub use drivers::{
    execution_ratio, readout_for, run_convergence, run_cost_model, run_error_propagation,
    run_hardware_style, run_jacobi_demo, run_trajectory, shock_diagnostics, shot_scaling,
    single_step_results, AggregateRow, ConvergenceReport, CostModelReport, ErrorReport,
    HardwareReport, HardwareRow, JacobiRow, Series, Setup, StepRecord,
};
pub use emit::{
    write_cost_model, write_error_report, write_hardware_report, write_jacobi, write_metadata,
};
pub use metrics::{error_norms, log_log_slope, Norms, Stat};
