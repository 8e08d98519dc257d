//! Run manifests and output directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the serialized scenario.
    pub scenario_hash: String,
    pub seed: u64,
    pub tool_version: String,
    /// Unix seconds; the only field that differs between identical runs.
    pub timestamp: u64,
    /// File names relative to the output directory, sorted.
    pub outputs: Vec<String>,
}

pub fn scenario_hash(scenario_toml: &str) -> String {
    hex::encode(Sha256::digest(scenario_toml.as_bytes()))
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Files written for one command, plus the manifest that lists them.
pub struct OutputDir {
    dir: Option<PathBuf>,
    files: Vec<String>,
}

impl OutputDir {
    pub fn new(dir: Option<&Path>) -> Result<Self, CliError> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| io_error(d, e))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            files: Vec::new(),
        })
    }

    pub fn is_enabled(&self) -> bool {
        self.dir.is_some()
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn finish(
        mut self,
        command: &str,
        scenario_hash: &str,
        seed: u64,
    ) -> Result<Option<RunManifest>, CliError> {
        let Some(d) = self.dir.take() else {
            return Ok(None);
        };
        self.files.sort();
        let manifest = RunManifest {
            command: command.to_string(),
            scenario_hash: scenario_hash.to_string(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            outputs: std::mem::take(&mut self.files),
        };
        let path = d.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
        Ok(Some(manifest))
    }
}

/// Write a single file outside any output directory.
pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_error(path, e))
}
