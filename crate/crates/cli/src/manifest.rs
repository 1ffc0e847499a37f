use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").expect("write to string");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    /// Fully resolved configuration; feeding it back through `--config` reproduces the run.
    pub config: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    /// SHA-256 over the subcommand, the canonical config and every output hash.
    pub content_hash: String,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        master_seed: Option<u64>,
        config: serde_json::Value,
        outputs: Vec<OutputFile>,
    ) -> Self {
        let mut h = format!("{subcommand}\n{config}\n");
        for o in &outputs {
            h.push_str(&format!("{} {}\n", o.sha256, o.file));
        }
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            master_seed,
            content_hash: sha256_hex(h.as_bytes()),
            config,
            outputs,
        }
    }

    pub fn file_name(subcommand: &str) -> String {
        format!("{subcommand}.manifest.json")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

/// Collects output files, writing each one and remembering its hash.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.push(OutputFile {
            file: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn into_files(self) -> Vec<OutputFile> {
        self.files
    }
}
