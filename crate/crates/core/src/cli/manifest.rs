use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::PipelineConfig;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// One line of `<run_dir>/manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub tool_version: String,
    pub warning_count: usize,
    pub error_count: usize,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    /// Subcommand-specific counters and values.
    pub stats: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &PipelineConfig) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            started_at: now(),
            finished_at: String::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            warning_count: 0,
            error_count: 0,
            warnings: Vec::new(),
            errors: Vec::new(),
            stats: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        if let Ok(sha256) = file_sha256(path) {
            self.inputs.push(FileDigest { path: path.to_path_buf(), sha256 });
        }
    }

    pub fn output(&mut self, path: &Path) {
        match file_sha256(path) {
            Ok(sha256) => self.outputs.push(FileDigest { path: path.to_path_buf(), sha256 }),
            Err(e) => self.error(format!("{}: {e}", path.display())),
        }
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
        self.warning_count = self.warnings.len();
    }

    pub fn error(&mut self, e: impl Into<String>) {
        self.errors.push(e.into());
        self.error_count = self.errors.len();
    }

    pub fn stat(&mut self, key: &str, value: impl Serialize) {
        self.stats.insert(key.to_string(), serde_json::to_value(value).expect("stat serializes"));
    }

    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    /// Stamps the finish time and appends one JSON line to the manifest.
    pub fn append_to(&mut self, run_dir: &Path) -> std::io::Result<PathBuf> {
        self.finished_at = now();
        std::fs::create_dir_all(run_dir)?;
        let path = run_dir.join(MANIFEST_FILE);
        let mut line = serde_json::to_string(self).map_err(std::io::Error::from)?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        f.write_all(line.as_bytes())?;
        Ok(path)
    }
}

pub fn read_manifests(run_dir: &Path) -> std::io::Result<Vec<RunManifest>> {
    let src = std::fs::read_to_string(run_dir.join(MANIFEST_FILE))?;
    src.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::from))
        .collect()
}

pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
