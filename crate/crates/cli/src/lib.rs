//! Command-line front end: scenario files, an expression language for
//! user-defined metrics and maps, and report output.

pub mod builtins;
pub mod commands;
pub mod emit;
pub mod error;
pub mod expr;
pub mod scenario;

pub use commands::run;
pub use error::CliError;
