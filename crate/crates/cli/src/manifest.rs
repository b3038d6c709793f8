//! Run manifests: what was asked for, hashed into the output directory name.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cascade_core::GeneratorSpec;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Command, spec and parameters of one run. The hash covers everything but
/// the timestamp, so equal manifests name equal output directories.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub spec: Value,
    pub spec_label: String,
    pub params: Value,
}

impl RunManifest {
    pub fn new(command: &str, spec: &GeneratorSpec, params: Value) -> Self {
        Self {
            command: command.to_string(),
            spec: spec.to_json(),
            spec_label: spec.label().to_string(),
            params,
        }
    }

    fn hashed_body(&self) -> Value {
        json!({
            "command": self.command,
            "spec": self.spec,
            "spec_label": self.spec_label,
            "params": self.params,
            "tool_version": env!("CARGO_PKG_VERSION"),
        })
    }

    /// Digest of the spec JSON alone (keys sorted, compact).
    pub fn spec_hash(&self) -> String {
        hex::encode(Sha256::digest(self.spec.to_string().as_bytes()))
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.hashed_body().to_string().as_bytes()))
    }

    /// `root/<first 16 hex digits of the hash>`.
    pub fn output_dir(&self, root: &Path) -> PathBuf {
        root.join(&self.hash()[..16])
    }

    pub fn to_json(&self) -> Value {
        let mut body = self.hashed_body();
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        body["spec_hash"] = json!(self.spec_hash());
        body["hash"] = json!(self.hash());
        body["timestamp"] = json!(ts);
        body
    }
}
