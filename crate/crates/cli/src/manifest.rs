use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::NodeConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance record written by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub command_line: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
    pub config: NodeConfig,
    pub module_versions: BTreeMap<String, String>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the configuration serialized as JSON.
pub fn config_hash(cfg: &NodeConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).unwrap_or_default().as_bytes())
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn module_versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("ionphoton".to_string(), ionphoton::VERSION.to_string()),
        ("ionphoton-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

/// Output directory that records what it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.retain(|f| f.path != name);
        self.files.push(OutputFile {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    /// Writes the resolved configuration and the manifest itself.
    pub fn finish(mut self, command: &str, command_line: &[String], cfg: &NodeConfig, started: f64) -> Result<RunManifest, CliError> {
        self.write("config.toml", cfg.to_toml()?.as_bytes())?;
        let manifest = RunManifest {
            command: command.to_string(),
            command_line: command_line.to_vec(),
            seed: cfg.experiment.seed,
            config_hash: config_hash(cfg),
            config: cfg.clone(),
            module_versions: module_versions(),
            started_unix_s: started,
            finished_unix_s: unix_now(),
            outputs: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        self.write(MANIFEST_FILE, text.as_bytes())?;
        Ok(manifest)
    }
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    /// Mismatches between the record and the files on disk; empty when the
    /// directory is intact.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        let mut problems = Vec::new();
        let hash = config_hash(&self.config);
        if hash != self.config_hash {
            problems.push(format!("config hash {hash} does not match recorded {}", self.config_hash));
        }
        for f in &self.outputs {
            match std::fs::read(dir.join(&f.path)) {
                Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
                Ok(_) => problems.push(format!("{}: content changed", f.path)),
                Err(e) => problems.push(format!("{}: {e}", f.path)),
            }
        }
        problems
    }
}
