use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use rfim_core::counting::COUNT_FORMAT;
use rfim_core::graph::GRAPH_FORMAT;
use rfim_core::model::INSTANCE_FORMAT;
use rfim_core::percolation::PERC_FORMAT;
use rfim_core::randgen::{FIELDS_FORMAT, GENERATOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a command. Embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub params: Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub formats: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, params: Value, seed: Option<u64>) -> Self {
        let formats = [
            ("graph", GRAPH_FORMAT),
            ("fields", FIELDS_FORMAT),
            ("instance", INSTANCE_FORMAT),
            ("count", COUNT_FORMAT),
            ("perc", PERC_FORMAT),
            ("generator", GENERATOR),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        RunManifest {
            tool: "rfim".into(),
            version: rfim_core::VERSION.into(),
            subcommand: subcommand.into(),
            params,
            inputs: Vec::new(),
            seed,
            formats,
        }
    }

    pub fn record_input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            role: role.into(),
            path: path.display().to_string(),
            sha256: digest_file(path)?,
        });
        Ok(())
    }

    /// Fails when an input has changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = digest_file(Path::new(&input.path))?;
            if now != input.sha256 {
                bail!("input {} ({}) changed: sha256 {} != {}", input.role, input.path, now, input.sha256);
            }
        }
        Ok(())
    }
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
