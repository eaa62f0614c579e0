use serde::Serialize;
use sha2::{Digest, Sha256};

/// Header of every report. Equal manifests give byte-identical output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub flags: serde_json::Value,
    pub seed: u64,
    /// First 8 bytes of the SHA-256 of the input, as hex.
    pub input_digest: String,
    pub version: &'static str,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, flags: &impl Serialize, seed: u64, input: &[u8]) -> Self {
        RunManifest {
            subcommand,
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            seed,
            input_digest: digest64(input),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

pub fn digest64(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    let v = u64::from_be_bytes(d[..8].try_into().expect("sha-256 has 32 bytes"));
    format!("{v:016x}")
}
