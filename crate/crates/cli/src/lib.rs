//! Command-line front end: dataset manifests and SCA1 trial files, training,
//! evaluation, benchmarking, synthetic data and the subspace accuracy grid.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
