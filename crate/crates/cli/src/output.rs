use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use surfshape::io;
use surfshape::{Result, ShapeError};

/// Output directory that records every artifact written through it.
pub struct Output {
    dir: PathBuf,
    files: BTreeSet<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| ShapeError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeSet::new(),
        })
    }

    /// Path of artifact `rel` (forward slashes), creating its parent.
    pub fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| ShapeError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        self.files.insert(rel.to_string());
        Ok(path)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.path(rel)?;
        io::write_json(value, path)
    }

    pub fn csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(rel)?;
        io::write_csv(path, header, rows)
    }

    pub fn artifacts(&self) -> Vec<String> {
        self.files.iter().cloned().collect()
    }

    /// Write `manifest.json`: command, version, seed, inputs and options,
    /// and the artifact list. No timestamps, so reruns are byte-identical.
    pub fn finish<T: Serialize>(mut self, command: &str, seed: Option<u64>, options: &T) -> Result<()> {
        let manifest = serde_json::json!({
            "tool": "surfshape",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "options": options,
            "artifacts": self.artifacts(),
        });
        self.json("manifest.json", &manifest)
    }
}
