//! File formats and command implementations behind the `blockdialect` binary.

pub mod commands;
pub mod csv_io;
pub mod error;
pub mod quantized_file;
pub mod rng;
pub mod tensor_file;

pub use error::{CliError, Result};
