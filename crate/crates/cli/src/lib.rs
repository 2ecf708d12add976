//! Experiment commands over the polarcap library: optimal profiles and
//! sweeps, regret simulation, exposure-log audits, ratings ingestion and
//! utility-loss grids. Every command produces a CSV [`Table`].

pub mod commands;
pub mod error;
pub mod inputs;
pub mod table;

pub use commands::*;
pub use error::{CliError, CliResult};
pub use inputs::{parse_bits, parse_seeds, read_labels, read_log, unit_grid, LogEntry, MeansFile};
pub use table::{fmt_num, Table};
