//! Batch front-end for the geoprox solver: TOML configs, a problem library,
//! property suites and artifact writers.

pub mod config;
pub mod library;
pub mod output;
pub mod run;
pub mod suites;

pub use config::{ConfigError, RunConfig};
pub use library::{ProblemLibraryEntry, LIBRARY};
pub use run::{run_source, RunOptions, RunOutcome};
pub use suites::{run_suite, PropertyResult, Suite};
