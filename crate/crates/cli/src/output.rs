//! Output directory handling and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::commands::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    /// Size on disk; absent for the manifest itself.
    pub bytes: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub timestamp_unix: u64,
    pub seed: u64,
    pub analytic: bool,
    pub files: Vec<FileEntry>,
}

/// Collects files written into one directory, then writes the manifest
/// naming every one of them (itself included).
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Output(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: Some(contents.len() as u64),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self, command: &str, config_hash: String, seed: u64, analytic: bool) -> Result<(), CliError> {
        self.files.push(FileEntry {
            name: MANIFEST.to_string(),
            bytes: None,
        });
        let files = std::mem::take(&mut self.files);
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            seed,
            analytic,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }
}
