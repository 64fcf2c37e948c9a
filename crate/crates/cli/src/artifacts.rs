//! Output directories, the single artifact writer and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.resolved";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub schema: String,
    pub schema_version: u32,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_schema_version: u32,
    pub toolkit_version: String,
    pub command: String,
    pub config_file: String,
    pub config_sha256: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub fault: Option<String>,
    pub wall_clock: bool,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Writes every file of one run and then the manifest describing them.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl ArtifactWriter {
    /// Creates `dir` if needed. Without `force`, fails when any of `files`,
    /// the manifest or the resolved config already exists there.
    pub fn create(dir: &Path, files: &[&str], force: bool) -> Result<Self, CliError> {
        if !force {
            let clash = files
                .iter()
                .chain([&MANIFEST_FILE, &CONFIG_FILE])
                .map(|f| dir.join(f))
                .find(|p| p.exists());
            if let Some(path) = clash {
                return Err(CliError::Usage(format!(
                    "{} already exists; pass --force to overwrite",
                    path.display()
                )));
            }
        }
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, file: &str, schema: &str, schema_version: u32, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(file);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.entries.push(ArtifactEntry {
            file: file.to_string(),
            schema: schema.to_string(),
            schema_version,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(
        &mut self,
        file: &str,
        schema: &str,
        schema_version: u32,
        value: &T,
    ) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::io(self.dir.join(file), std::io::Error::other(e)))?;
        bytes.push(b'\n');
        self.write(file, schema, schema_version, &bytes)
    }

    /// Writes the resolved config and the manifest; returns the manifest.
    pub fn finish(
        self,
        command: &str,
        config: &RunConfig,
        seeds: BTreeMap<String, u64>,
        fault: Option<&str>,
        wall_clock: bool,
    ) -> Result<Manifest, CliError> {
        let text = config.to_text();
        let path = self.dir.join(CONFIG_FILE);
        fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        let manifest = Manifest {
            manifest_schema_version: MANIFEST_SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            command: command.to_string(),
            config_file: CONFIG_FILE.to_string(),
            config_sha256: sha256_hex(text.as_bytes()),
            config: config.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            seeds,
            fault: fault.map(str::to_string),
            wall_clock,
            artifacts: self.entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::io(self.dir.join(MANIFEST_FILE), std::io::Error::other(e)))?;
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_to_overwrite_without_force() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut w = ArtifactWriter::create(&dir, &["a.csv"], false).unwrap();
        w.write("a.csv", "a_csv", 1, b"x\n").unwrap();
        w.finish("train", &RunConfig::default(), BTreeMap::new(), None, false)
            .unwrap();
        assert!(matches!(
            ArtifactWriter::create(&dir, &["a.csv"], false),
            Err(CliError::Usage(_))
        ));
        assert!(ArtifactWriter::create(&dir, &["a.csv"], true).is_ok());
        assert!(ArtifactWriter::create(&dir, &["b.csv"], false).is_err());
    }

    #[test]
    fn manifest_hashes_match_files() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::create(tmp.path(), &["a.csv"], false).unwrap();
        w.write("a.csv", "a_csv", 1, b"hello\n").unwrap();
        let m = w
            .finish("train", &RunConfig::default(), BTreeMap::new(), None, false)
            .unwrap();
        let text = fs::read(tmp.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(m.config_sha256, sha256_hex(&text));
        assert_eq!(m.artifacts[0].sha256, sha256_hex(b"hello\n"));
        let stored: Manifest = serde_json::from_slice(&fs::read(tmp.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(stored, m);
    }
}
