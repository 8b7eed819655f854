//! Canonical JSON for reports and the run manifest that accompanies them.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// JSON with object keys sorted and no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    Ok(sorted(v).to_string())
}

// serde_json::Map is a BTreeMap unless `preserve_order` is enabled somewhere in the build;
// rebuild objects explicitly so the output does not depend on feature unification.
fn sorted(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> =
                map.into_iter().map(|(k, v)| (k, sorted(v))).collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Lowercase hex SHA-256.
pub fn checksum(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// One residue per line, ascending.
pub fn residues_csv(header: &str, residues: &[u64]) -> String {
    let mut sorted = residues.to_vec();
    sorted.sort_unstable();
    let mut out = format!("{header}\n");
    for r in sorted {
        out.push_str(&format!("{r}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub version: String,
    pub elapsed_ms: u128,
    pub jobs: usize,
    pub checksum: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: Value,
        jobs: usize,
        elapsed_ms: u128,
        report_json: &str,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            elapsed_ms,
            jobs,
            checksum: checksum(report_json),
        }
    }
}
