//! Configuration, result files and charts.

pub mod config;
pub mod output;
pub mod run;
pub mod svg;

pub use config::{Command, Overrides, RunConfig};
pub use output::{Manifest, OutputDir, Table};
pub use run::execute;
