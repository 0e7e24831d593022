use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Failure;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRun {
    pub command: String,
    pub config_digest: String,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputFile>,
}

/// One manifest per output directory; each command run against it appends a record.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub runs: Vec<ManifestRun>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Collects files for one command and records them in the directory's manifest.
pub struct OutputDir {
    dir: PathBuf,
    command: &'static str,
    config_digest: String,
    started: String,
    outputs: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &'static str, config_bytes: &[u8]) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::input)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config_digest: sha256_hex(config_bytes),
            started: now(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::input)?;
        self.outputs.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn finish(self) -> Result<(), Failure> {
        let path = self.dir.join(MANIFEST);
        let mut manifest = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice::<RunManifest>(&bytes)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::input)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => RunManifest::default(),
            Err(e) => return Err(Failure::input(anyhow::Error::new(e).context("reading manifest"))),
        };
        manifest.runs.push(ManifestRun {
            command: self.command.to_string(),
            config_digest: self.config_digest,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started,
            finished: now(),
            outputs: self.outputs,
        });
        let bytes = to_json(&manifest)?;
        fs::write(&path, bytes)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::input)
    }
}

/// Pretty JSON with a trailing newline. Floats print in shortest round-trip form.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .context("serializing JSON")
        .map_err(Failure::input)?;
    bytes.push(b'\n');
    Ok(bytes)
}
