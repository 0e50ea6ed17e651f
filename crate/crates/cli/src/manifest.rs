use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seconds since the epoch, pinned by SOURCE_DATE_EPOCH when set so reruns are byte-identical.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    /// Hash of the config file, or of the effective arguments when there is no file.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputFile>,
}

pub struct Run {
    command: String,
    out_dir: PathBuf,
    config_path: Option<String>,
    config_sha256: String,
    seed: Option<u64>,
    started: u64,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(
        command: &str,
        out_dir: &Path,
        config_path: Option<&Path>,
        config_bytes: &[u8],
        seed: Option<u64>,
    ) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self {
            command: command.to_string(),
            out_dir: out_dir.to_path_buf(),
            config_path: config_path.map(|p| p.display().to_string()),
            config_sha256: sha256_hex(config_bytes),
            seed,
            started: timestamp(),
            outputs: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Records a file written by someone else.
    pub fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn finish(self) -> Result<PathBuf> {
        let mut outputs = Vec::new();
        for p in &self.outputs {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let shown = p.strip_prefix(&self.out_dir).unwrap_or(p);
            outputs.push(OutputFile {
                path: shown.display().to_string(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        let manifest = RunManifest {
            command: self.command.clone(),
            config_path: self.config_path,
            config_sha256: self.config_sha256,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: timestamp(),
            outputs,
        };
        let path = self.out_dir.join(format!("{}_manifest.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}
