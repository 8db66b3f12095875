use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Provenance block embedded in every output file. Wall-clock is recorded as
/// the budget the run was given, not the time it took, so reruns compare
/// byte for byte.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub parameters: Value,
    pub seed: u64,
    pub budget_seconds: f64,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        config: Option<(&str, &[u8])>,
        parameters: Value,
        seed: u64,
        budget_seconds: f64,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config_path: config.map(|(p, _)| p.to_string()),
            config_sha256: config.map(|(_, b)| sha256_hex(b)),
            parameters,
            seed,
            budget_seconds,
        }
    }

    /// Single-line JSON, for CSV comment headers.
    pub fn compact(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
