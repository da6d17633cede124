//! Files in and out: data tables, model documents, run configuration.

mod config;
mod model_file;
mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{GoalError, Result};

pub use config::{
    DataOverrides, FitOverrides, GridOverrides, RunConfig, SplitOverrides, WormsOverrides,
};
pub use model_file::{load_model, save_model, write_json, Dimensions, FitMetadata, ModelFile, FORMAT_VERSION};
pub use table::{
    load_dataset, read_features, read_labels, read_table, write_features, write_labels, write_table,
    Orientation, Table,
};

/// Writes `path` through a temporary file in the same directory that is
/// renamed into place only after `fill` succeeded, so readers never see a
/// partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&File>) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| GoalError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| GoalError::io(path, e))?;
        w.flush().map_err(|e| GoalError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| GoalError::io(path, e.error))?;
    Ok(())
}

/// Creates `dir` and its parents if missing.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GoalError::io(dir, e))
}
