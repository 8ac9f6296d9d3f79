//! Library side of the `sidelink` command: config files, sweeps and
//! output handling.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{echo_config, parse_config, ConfigError, ConfigFile};
pub use sweep::{run_sweep, RunSpec, SummaryRow, SweepOutcome};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const RUNTIME: i32 = 4;
}
