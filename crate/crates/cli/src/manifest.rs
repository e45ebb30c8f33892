//! Run manifests: command, resolved config, seeds and content hashes of
//! every input and output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn digest_inputs(cfg: &RunConfig) -> CliResult<Vec<FileDigest>> {
    cfg.paths
        .all()
        .into_iter()
        .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: digest_file(p)? }))
        .collect()
}

/// Output files written by a command, keyed by their path relative to the
/// output directory.
#[derive(Debug, Default)]
pub struct Outputs {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    pub fn new(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `rel` (forward-slash separated) under the root.
    pub fn write(&mut self, rel: &str, contents: &str) -> CliResult<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn digests(&self) -> Vec<FileDigest> {
        self.files.iter().map(|(p, h)| FileDigest { path: p.clone(), sha256: h.clone() }).collect()
    }
}

pub fn seeds(cfg: &RunConfig) -> BTreeMap<String, u64> {
    BTreeMap::from([
        ("seed".to_string(), cfg.seed),
        ("simulate_noise".to_string(), cfg.seed),
        ("simulate_corruption".to_string(), corruption_seed(cfg.seed)),
        ("train_init".to_string(), cfg.train.seed),
    ])
}

pub fn corruption_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self).map(|s| s + "\n").map_err(|e| CliError::Validation(e.to_string()))
    }

    /// Fails when a recorded input no longer matches its hash.
    pub fn verify_inputs(&self) -> CliResult<()> {
        for f in &self.inputs {
            let now = digest_file(Path::new(&f.path))?;
            if now != f.sha256 {
                return Err(CliError::Validation(format!("input {} changed since the manifest was written", f.path)));
            }
        }
        Ok(())
    }
}
