//! Configuration files, figure presets, CSV/JSON export and the `lrlab`
//! command line.

pub mod config;
pub mod csv;
pub mod report;
pub mod reproduce;
pub mod run;
pub mod svg;

pub use config::{parse_config, render_config, ConfigError, ExperimentConfig};
pub use csv::emit_csv;
pub use report::RunReport;
pub use reproduce::{run_reproduce, Figure};
pub use run::{run_bounds, run_commutator, run_evolve};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RESOURCE: i32 = 3;
    pub const NUMERIC: i32 = 4;
}
