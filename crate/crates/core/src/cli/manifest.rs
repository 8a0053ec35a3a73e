use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use ditchkit::{Error, Result};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: Vec<String>,
    seed: Option<u64>,
    config: &'a Value,
    config_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `manifest.json` into `dir`: the resolved configuration, its hash,
/// the seed and the command line.
pub fn write(dir: &Path, command: &str, seed: Option<u64>, config: &Value) -> Result<()> {
    let canonical = serde_json::to_vec(config)?;
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv: std::env::args().collect(),
        seed,
        config,
        config_sha256: sha256_hex(&canonical),
    };
    let path = dir.join("manifest.json");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").map_err(|e| Error::io(&path, e))
}
