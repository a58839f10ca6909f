//! Command-line front end for `gmkit`: model documents, CSV data and JSON result envelopes.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric error, 4 usage error.

pub mod args;
pub mod commands;
pub mod data;
pub mod envelope;
pub mod error;
pub mod model;

pub use commands::run;
pub use envelope::Envelope;
pub use error::CliError;
pub use model::{parse_model, ModelDocument};

/// The envelope schema shipped with the binary.
pub const ENVELOPE_SCHEMA: &str = include_str!("../schema/envelope.schema.json");
