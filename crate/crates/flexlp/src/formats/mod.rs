//! On-disk formats.

pub mod checkpoint;
pub mod generated;
pub mod split_file;
pub mod trace;

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

pub use checkpoint::{Checkpoint, ModelMeta};
pub use generated::{GeneratedBlock, GeneratedDump};
pub use split_file::SplitFile;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
