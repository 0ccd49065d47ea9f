//! Front end of `nld`: config parsing, data expressions and the commands.

pub mod config;
pub mod expr;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use run::{run, Command, Outcome, RunError, Study, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERDICT};
