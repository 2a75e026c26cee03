//! Output directory owned by one run at a time.

use std::fs::OpenOptions;
use std::io::{BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const LOCK_FILE: &str = "dcma.lock";

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates the directory if needed and takes its lock file; fails if
    /// another run holds it.
    pub fn open(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| {
            CliError::runtime(format!("cannot create output directory {}: {e}", root.display()))
        })?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(CliError::runtime(format!(
                    "output directory {} is locked by another run (remove {} if it is stale)",
                    root.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.path(name), contents)
            .map_err(|e| CliError::runtime(format!("cannot write {name}: {e}")))
    }

    /// Streams into `name` through `f`.
    pub fn write_with<F>(&self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<std::fs::File>) -> Result<(), CliError>,
    {
        let file = std::fs::File::create(self.path(name))
            .map_err(|e| CliError::runtime(format!("cannot create {name}: {e}")))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(self.root.join(LOCK_FILE));
    }
}
