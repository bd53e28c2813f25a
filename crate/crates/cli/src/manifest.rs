//! Run manifests: what was run, on which inputs, with which config.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub threads: usize,
    pub seeds: Vec<u64>,
    /// The effective config (file plus overrides) and its SHA-256.
    pub config: Option<toml::Table>,
    pub config_sha256: Option<String>,
    /// SHA-256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut r = BufReader::with_capacity(1 << 20, File::open(path)?);
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, threads: usize) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            seeds: Vec::new(),
            config: None,
            config_sha256: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    pub fn with_config(mut self, table: &toml::Table) -> Self {
        let text = toml::to_string(table).unwrap_or_default();
        self.config_sha256 = Some(sha256_bytes(text.as_bytes()));
        self.config = Some(table.clone());
        self
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into().display().to_string());
    }

    /// Writes `manifest.json` into `dir`.
    pub fn write_dir(self, dir: &Path) -> CliResult<PathBuf> {
        self.write_to(dir.join(MANIFEST_NAME))
    }

    /// Sidecar manifest for a single-file output: `<file>.manifest.json`.
    pub fn write_sidecar(self, output: &Path) -> CliResult<PathBuf> {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        self.write_to(PathBuf::from(name))
    }

    fn write_to(mut self, path: PathBuf) -> CliResult<PathBuf> {
        self.finished_at = now();
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
