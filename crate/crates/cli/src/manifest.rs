//! Run manifests: what was run, on which inputs, with which configuration.
//!
//! `manifest.json` is deterministic for a given command, configuration and
//! input set. The wall-clock time goes to `manifest.time.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, Read};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_fingerprint: String,
    pub config: serde_json::Value,
    /// SHA-256 of every input file, keyed by config field.
    pub inputs: BTreeMap<String, String>,
    /// Artifacts written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    pub versions: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut reader = BufReader::with_capacity(1 << 20, File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl Manifest {
    /// Hashes the inputs the command actually read.
    pub fn new(
        command: &str,
        config: &PipelineConfig,
        used: &[(String, &Path)],
        outputs: Vec<String>,
    ) -> io::Result<Self> {
        let mut inputs = BTreeMap::new();
        for (field, path) in used {
            inputs.insert(field.clone(), sha256_file(path)?);
        }
        let versions = BTreeMap::from([
            ("sensekit".to_string(), sensekit_version().to_string()),
            ("sensekit-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Ok(Manifest {
            command: command.to_string(),
            config_fingerprint: config.fingerprint(),
            config: serde_json::from_str(&config.canonical_json()).expect("canonical JSON parses"),
            inputs,
            outputs,
            versions,
        })
    }

    pub fn write(&self, out_dir: &Path) -> io::Result<()> {
        fs::create_dir_all(out_dir)?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(out_dir.join("manifest.json"), text + "\n")?;
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let stamp = serde_json::json!({ "command": self.command, "unix_time": secs });
        fs::write(out_dir.join("manifest.time.json"), stamp.to_string() + "\n")
    }
}

fn sensekit_version() -> &'static str {
    sensekit::VERSION
}
