//! Output directory with atomic writes: files land via
//! write-temp-then-rename, and nothing is written outside the directory.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::data(format!("cannot create output dir {}: {e}", dir.display()))
        })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let tmp = self.dir.join(format!(".tmp.{name}"));
        let target = self.dir.join(name);
        std::fs::write(&tmp, bytes)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, &target)
            .map_err(|e| CliError::data(format!("cannot move into place {}: {e}", target.display())))?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut json = serde_json::to_string_pretty(value).expect("report serialization");
        json.push('\n');
        self.write(name, json.as_bytes())
    }
}
