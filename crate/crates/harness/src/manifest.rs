//! Run manifests and config digests.

use serde::{Deserialize, Serialize};

/// FNV-1a over the canonical (sorted-key) JSON encoding, so the digest is
/// stable under config field reordering.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let canonical = serde_json::to_string(&value).expect("canonical encoding");
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// Written next to every experiment's outputs; all emitted files carry the
/// digest so results can be traced back to their exact configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub digest: String,
    pub code_version: String,
    pub kind: String,
    pub seeds: Vec<u64>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn new(digest: String, kind: &str, seeds: &[u64], wall_seconds: f64) -> Self {
        RunManifest {
            digest,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: kind.to_string(),
            seeds: seeds.to_vec(),
            wall_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn digest_stable_under_field_order() {
        let a = json!({"x": 1, "y": [1, 2], "z": {"a": true, "b": 0.5}});
        let b = json!({"z": {"b": 0.5, "a": true}, "y": [1, 2], "x": 1});
        assert_eq!(config_digest(&a), config_digest(&b));
        let c = json!({"x": 2, "y": [1, 2], "z": {"a": true, "b": 0.5}});
        assert_ne!(config_digest(&a), config_digest(&c));
    }
}
