//! `artifacts.json`: which command wrote each output file, under which stage
//! hash, and the file's SHA-256 at the time.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsp_core::io::file_hash;
use tsp_core::TspError;

use crate::config::Stage;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "artifacts.json";

pub const SPLIT: &str = "split.json";
pub const BACKBONE: &str = "backbone.emb";
pub const BACKBONE_LAYER0: &str = "backbone_layer0.emb";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const RESOLVENT_DIAGNOSTICS: &str = "diagnostics_resolvent.csv";
pub const UPDATE_DIAGNOSTICS: &str = "diagnostics_update.csv";
pub const LEMMA_CHECKS: &str = "lemma_checks.json";
pub const COMPLEX: &str = "complex.json";
pub const FUSED: &str = "fused.emb";
pub const PROVENANCE: &str = "provenance.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

/// The primary output of each stage.
pub const PRIMARY: [&str; 6] = [SPLIT, BACKBONE, LEMMA_CHECKS, COMPLEX, FUSED, REPORT_JSON];

pub fn boundary_file(k: usize) -> String {
    format!("boundary_{k}.txt")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub producer: String,
    pub config_hash: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub artifacts: BTreeMap<String, ArtifactRecord>,
}

/// An output directory plus its manifest.
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn open(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| TspError::io(format!("creating {}", dir.display()), e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn manifest(&self) -> CliResult<ArtifactManifest> {
        let path = self.path(MANIFEST);
        if !path.exists() {
            return Ok(ArtifactManifest::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| TspError::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Hashes freshly written files and records them.
    pub fn record(&self, stage: Stage, config_hash: &str, files: &[String]) -> CliResult<()> {
        let mut manifest = self.manifest()?;
        // a rerun may write fewer files (e.g. a smaller K); drop the old set
        manifest.artifacts.retain(|_, r| r.producer != stage.command());
        for name in files {
            manifest.artifacts.insert(
                name.clone(),
                ArtifactRecord {
                    producer: stage.command().into(),
                    config_hash: config_hash.into(),
                    sha256: file_hash(&self.path(name))?,
                },
            );
        }
        let path = self.path(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| TspError::io(format!("writing {}", path.display()), e))?;
        Ok(())
    }

    /// Checks that `name` exists, was written by `stage` under
    /// `expected_hash` and has not changed since.
    pub fn require(&self, name: &str, stage: Stage, expected_hash: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        let producer = stage.command();
        let manifest = self.manifest()?;
        let record = match manifest.artifacts.get(name) {
            Some(r) if path.exists() => r,
            _ => return Err(CliError::MissingArtifact { path, producer }),
        };
        if record.producer != producer {
            return Err(CliError::StaleArtifact {
                path,
                producer,
                reason: format!("recorded as produced by `{}`", record.producer),
            });
        }
        if record.config_hash != expected_hash {
            return Err(CliError::StaleArtifact {
                path,
                producer,
                reason: "it was produced under a different configuration".into(),
            });
        }
        if file_hash(&path)? != record.sha256 {
            return Err(CliError::StaleArtifact {
                path,
                producer,
                reason: "its contents changed after it was written".into(),
            });
        }
        Ok(path)
    }
}
