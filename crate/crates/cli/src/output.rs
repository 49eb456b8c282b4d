//! Atomic file output: every file is written to a temporary sibling and
//! renamed into place, so an interrupted run never leaves a partial file.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::failure::Failure;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root)?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Runs `fill` against a temporary file and renames it to `name`.
    pub fn write<F>(&self, name: &str, fill: F) -> Result<PathBuf, Failure>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), Failure>,
    {
        let target = self.path(name);
        let tmp = NamedTempFile::new_in(&self.root)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w)?;
            w.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&target).map_err(|e| Failure::from(e.error))?;
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}
