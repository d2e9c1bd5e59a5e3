use std::fs;
use std::path::PathBuf;

use anyhow::Context as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Outcome;
use crate::Context;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub exit_code: u8,
    pub notes: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    /// Fully resolved options; usable verbatim as a `--config` file.
    pub config: toml::Table,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write(ctx: &Context, outcome: &Outcome, started: DateTime<Utc>, exit_code: u8) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&ctx.out)?;
    let mut outputs = Vec::new();
    for p in &outcome.outputs {
        let bytes = fs::read(p).with_context(|| format!("reading output {}", p.display()))?;
        outputs.push(OutputEntry {
            path: p
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let m = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: outcome.subcommand.to_string(),
        seed: outcome.seed,
        started_at: started.to_rfc3339(),
        finished_at: Utc::now().to_rfc3339(),
        exit_code,
        notes: outcome.notes.clone(),
        outputs,
        config: outcome.config.clone(),
    };
    let path = ctx.out.join(MANIFEST_FILE);
    fs::write(&path, toml::to_string(&m)?)?;
    Ok(path)
}
