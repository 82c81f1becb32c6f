//! Pipeline library behind the `sattrace` binary; the stages are exposed
//! so tests and other tooling can drive them directly.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::RunConfig;
pub use error::CliError;
