//! Reproducibility manifests: every file-writing run leaves a
//! `<out>.manifest.json` next to its primary output recording the tool
//! version, subcommand, full flag set, and SHA-256 digests of all outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use orey_core::Result;

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// The full resolved flag set of the run.
    pub args: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub timestamp_utc: String,
    pub outputs: Vec<OutputDigest>,
}

#[derive(Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write the manifest for a completed run next to its primary output.
pub fn write<A: Serialize>(
    subcommand: &str,
    args: &A,
    model: Option<&str>,
    seed: Option<u64>,
    outputs: &[PathBuf],
    primary_out: &Path,
) -> Result<()> {
    let mut digests = Vec::with_capacity(outputs.len());
    for path in outputs {
        digests.push(OutputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
    }
    // Normalize the args into a sorted map for stable serialization.
    let args_value = serde_json::to_value(args).expect("args serialization");
    let args_map: BTreeMap<String, serde_json::Value> = match args_value {
        serde_json::Value::Object(map) => map.into_iter().collect(),
        other => BTreeMap::from([("args".to_string(), other)]),
    };
    let manifest = RunManifest {
        tool: "orey".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        args: serde_json::to_value(args_map).expect("args map"),
        model: model.map(str::to_string),
        seed,
        timestamp_utc: chrono::Utc::now().to_rfc3339(),
        outputs: digests,
    };
    let mut name = primary_out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    let manifest_path = primary_out.with_file_name(name);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    std::fs::write(manifest_path, json + "\n")?;
    Ok(())
}
