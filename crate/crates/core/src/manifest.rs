//! Provenance record embedded in every output file.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub program: String,
    pub version: String,
    pub subcommand: String,
    pub params_file: Option<String>,
    pub overrides: Vec<String>,
    /// Every resolved setting as `key=value`.
    pub config: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: u64,
    /// Seconds since the Unix epoch; not part of the reproducible data.
    pub timestamp: u64,
    /// Extra subcommand arguments.
    pub arguments: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, cfg: &RunConfig) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            params_file: None,
            overrides: Vec::new(),
            config: cfg
                .pairs()
                .into_iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect(),
            outputs: Vec::new(),
            seed: cfg.seed,
            timestamp,
            arguments: Vec::new(),
        }
    }

    /// `# key: value` header lines for CSV files.
    pub fn csv_header(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# program: {} {}\n", self.program, self.version));
        out.push_str(&format!("# subcommand: {}\n", self.subcommand));
        if let Some(p) = &self.params_file {
            out.push_str(&format!("# params_file: {p}\n"));
        }
        for o in &self.overrides {
            out.push_str(&format!("# override: {o}\n"));
        }
        for a in &self.arguments {
            out.push_str(&format!("# argument: {a}\n"));
        }
        for c in &self.config {
            out.push_str(&format!("# config: {c}\n"));
        }
        for o in &self.outputs {
            out.push_str(&format!("# output: {o}\n"));
        }
        out.push_str(&format!("# seed: {}\n", self.seed));
        out.push_str(&format!("# timestamp: {}\n", self.timestamp));
        out
    }
}
