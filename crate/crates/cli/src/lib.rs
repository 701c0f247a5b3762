//! Subcommands of the `klmdp` binary, exposed as functions.

pub mod config;
pub mod error;
pub mod plot;
pub mod solve;
pub mod track;

pub use config::{ExperimentConfig, GraphSource};
pub use error::{CliError, Result};
pub use plot::cmd_plot;
pub use solve::{cmd_solve, SolveOptions, SolveReport};
pub use track::{cmd_track, TrackReport};
