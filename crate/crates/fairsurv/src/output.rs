//! Output directory layout and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// `<root>/{models,traces,reports,sweeps,data}`
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn sub(&self, dir: &str, file: &str) -> PathBuf {
        self.root.join(dir).join(file)
    }

    pub fn model(&self, stem: &str) -> PathBuf {
        self.sub("models", &format!("{stem}.json"))
    }

    pub fn trace(&self, stem: &str) -> PathBuf {
        self.sub("traces", &format!("{stem}.csv"))
    }

    pub fn report(&self, file: &str) -> PathBuf {
        self.sub("reports", file)
    }

    pub fn sweep(&self, file: &str) -> PathBuf {
        self.sub("sweeps", file)
    }

    pub fn data(&self, file: &str) -> PathBuf {
        self.sub("data", file)
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut fs::File) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    body(tmp.as_file_mut())
        .and_then(|_| tmp.as_file_mut().flush())
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, |f| f.write_all(contents.as_bytes()))
}
