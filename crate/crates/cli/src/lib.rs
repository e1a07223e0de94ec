//! Experiment harness around the core solvers: scenario configuration,
//! command drivers, CSV/JSON artifact emission, and run records. Every
//! command is a deterministic function of (config, seed, flags); repeated
//! runs produce byte-identical data artifacts.

pub mod commands;
pub mod config;
pub mod output;
pub mod record;

/// Process exit codes shared by all commands: 0 success/converged/feasible,
/// 1 configuration or I/O error, 2 diverged/infeasible/bracket failure,
/// 3 iteration budget exhausted.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DIVERGED: i32 = 2;
    pub const MAX_ITERATIONS: i32 = 3;
}
