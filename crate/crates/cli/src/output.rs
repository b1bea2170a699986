use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

/// Output directory; files appear only once fully written.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|source| CliError::Write { path: dir.clone(), source })?;
        Ok(Self { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `contents` to a temporary file in the same directory and renames it into place.
    pub fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let err = |source| CliError::Write { path: path.clone(), source };
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(err)?;
        tmp.write_all(contents).map_err(err)?;
        tmp.as_file().sync_all().map_err(err)?;
        tmp.persist(&path).map_err(|e| err(e.error))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Sidecar log with wall-clock data, kept out of the deterministic outputs.
    pub fn write_log(&self, subcommand: &str, elapsed: Duration, exit_code: i32) -> Result<PathBuf, CliError> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let text = format!(
            "subcommand={subcommand}\nfinished_unix={stamp}\nelapsed_seconds={:.3}\nexit_code={exit_code}\n",
            elapsed.as_secs_f64()
        );
        self.write(&format!("{subcommand}.log"), text.as_bytes())
    }
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.to_path_buf(), source })
}
