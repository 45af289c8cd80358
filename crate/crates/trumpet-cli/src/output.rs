//! Output directory bookkeeping and the run manifest.

use crate::error::{CliError, CliResult};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub struct OutDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Validation(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `bytes` to `name` under the root and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&p, bytes).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", p.display())))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.into(),
            sha256: hex(&Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> CliResult<PathBuf> {
        let mut s = serde_json::to_string_pretty(v).expect("output serializes");
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Writes `manifest.json`: command, resolved configuration, file digests, versions.
    pub fn finish(mut self, command: &str, config: Value) -> CliResult<Vec<FileRecord>> {
        let manifest = json!({
            "tool": "trumpet",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "files": self.files,
        });
        let files = self.files.clone();
        self.write_json("manifest.json", &manifest)?;
        Ok(files)
    }
}

/// Header line embedding a configuration in CSV outputs.
pub fn config_line<T: Serialize>(cfg: &T) -> String {
    format!("config={}", serde_json::to_string(cfg).expect("configuration serializes"))
}
