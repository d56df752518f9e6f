use crate::error::CliError;
use serde::Serialize;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const LOCK_FILE: &str = ".bosonlab.lock";

/// Output directory held under an exclusive lock file for the life of the value.
pub struct RunDir {
    path: PathBuf,
    lock: PathBuf,
}

impl RunDir {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path)?;
        let lock = path.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(CliError::Locked(path.to_path_buf())),
            Err(e) => return Err(e.into()),
        }
        Ok(Self { path: path.to_path_buf(), lock })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn subdir(&self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.path.join(name);
        fs::create_dir_all(&p)?;
        Ok(p)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// CSV with a header row; every record must have the header's width.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Round-trip float formatting, so CSV values are reproducible bit for bit.
pub fn f(x: f64) -> String {
    format!("{x:?}")
}
