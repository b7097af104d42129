//! Run manifests: what was run, on which inputs, with which settings.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRecord {
    pub name: String,
    /// SHA-256 of the input text.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputRecord>,
    /// Command-specific arguments beyond the shared configuration.
    pub arguments: Vec<(String, String)>,
    pub config: RunConfig,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub tool_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            arguments: Vec::new(),
            config: config.clone(),
            seed: config.seed,
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
        }
    }

    pub fn input(&mut self, name: String, text: &str) {
        self.inputs.push(InputRecord {
            name,
            sha256: sha256_hex(text.as_bytes()),
        });
    }

    pub fn argument(&mut self, key: &str, value: impl ToString) {
        self.arguments.push((key.to_string(), value.to_string()));
    }

    /// Hash embedded in every artifact. The timestamp is left out so that
    /// repeating a run reproduces its artifacts byte for byte.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v.as_object_mut().expect("manifest is an object").remove("timestamp");
        sha256_hex(serde_json::to_string(&v).expect("JSON values serialize").as_bytes())
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v["manifest_sha256"] = self.hash().into();
        let mut s = serde_json::to_string_pretty(&v).expect("JSON values serialize");
        s.push('\n');
        s
    }
}
