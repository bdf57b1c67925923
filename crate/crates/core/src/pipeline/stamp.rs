//! Reproducibility stamp written next to every command's outputs: the
//! command, its effective configuration, the seed and a SHA-256 digest of
//! each input file.
//!
//! Nothing that varies between equivalent runs (worker count, output
//! location, timestamps) goes in, so identical runs produce identical stamps.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Stamp {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Input path (as named in the manifest) to hex SHA-256.
    pub inputs: BTreeMap<String, String>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Stamp {
    /// Digests `inputs`, given as (display name, resolved path) pairs.
    pub fn new(
        command: &str,
        config: serde_json::Value,
        seed: Option<u64>,
        inputs: &[(String, std::path::PathBuf)],
    ) -> Result<Self> {
        let digests: Vec<(String, String)> = inputs
            .par_iter()
            .map(|(name, path)| Ok((name.clone(), file_digest(path)?)))
            .collect::<Result<_>>()?;
        Ok(Stamp {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            seed,
            inputs: digests.into_iter().collect(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("stamp serializes");
        text.push('\n');
        fs::write(dir.join("stamp.json"), text)?;
        Ok(())
    }
}
