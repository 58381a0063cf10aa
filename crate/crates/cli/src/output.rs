//! Report, summary and manifest files.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const REPORT: &str = "report.json";
pub const SUMMARY: &str = "summary.csv";
pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn pretty(value: &Value) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Contract(format!("serialize: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Hashes of input files named by the config, so a manifest pins their contents.
fn input_hashes(cfg: &RunConfig) -> Value {
    let mut inputs = serde_json::Map::new();
    for spec in [cfg.model.as_deref(), cfg.f.as_deref()].into_iter().flatten() {
        let path = Path::new(spec);
        if path.is_file() {
            if let Ok(bytes) = fs::read(path) {
                inputs.insert(spec.to_string(), Value::String(sha256_hex(&bytes)));
            }
        }
    }
    Value::Object(inputs)
}

pub fn write_outputs(dir: &Path, command: &str, cfg: &RunConfig, report: &Value, csv: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let report_bytes = pretty(report)?;
    fs::write(dir.join(REPORT), &report_bytes)?;
    fs::write(dir.join(SUMMARY), csv.as_bytes())?;

    let config = serde_json::to_value(cfg).map_err(|e| CliError::Contract(format!("serialize config: {e}")))?;
    let config_text = serde_json::to_string(&json!({ "command": command, "config": config }))
        .map_err(|e| CliError::Contract(format!("serialize config: {e}")))?;
    let manifest = json!({
        "command": command,
        "config": config,
        "config_sha256": sha256_hex(config_text.as_bytes()),
        "seed": cfg.seed,
        "inputs": input_hashes(cfg),
        "versions": {
            "fclt-cli": env!("CARGO_PKG_VERSION"),
            "fclt-core": fclt_core::VERSION,
        },
        "outputs": {
            REPORT: sha256_hex(&report_bytes),
            SUMMARY: sha256_hex(csv.as_bytes()),
        },
    });
    fs::write(dir.join(MANIFEST), pretty(&manifest)?)?;
    Ok(())
}
