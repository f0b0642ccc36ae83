//! JSON run manifests. Each run writes a new file; existing manifests are
//! never modified.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ResultRow;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_fingerprint: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub master_seed: u64,
    /// Canonical form of the effective configuration.
    pub config: serde_json::Value,
    /// Result files relative to the output directory.
    pub files: Vec<String>,
    pub all_pass: bool,
    pub rows: Vec<ResultRow>,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, master_seed: u64, files: Vec<String>, rows: Vec<ResultRow>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            config_fingerprint: super::sha256_hex(config.to_string().as_bytes()),
            tool_version: TOOL_VERSION.to_string(),
            timestamp,
            master_seed,
            config,
            files,
            all_pass: rows.iter().all(|r| r.pass),
            rows,
        }
    }

    /// Writes `manifests/run-<fingerprint>-<timestamp>[-k].json` under `out_dir`
    /// without touching existing files.
    pub fn write_new(&self, out_dir: &Path) -> Result<PathBuf> {
        let dir = out_dir.join("manifests");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let stem = format!("run-{}-{}", &self.config_fingerprint[..12], self.timestamp);
        let body = serde_json::to_vec_pretty(self)?;
        for k in 0u32.. {
            let name = if k == 0 { format!("{stem}.json") } else { format!("{stem}-{k}.json") };
            let path = dir.join(name);
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    f.write_all(&body).map_err(|e| Error::io(&path, e))?;
                    return Ok(path);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
        unreachable!("u32 range exhausted")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
    }
}
