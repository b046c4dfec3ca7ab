use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use super::config::{RunConfig, ValidationSummary};
use super::output::write_json;
use crate::error::Result;

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: RunStatus,
    pub exit_code: Option<i32>,
    pub message: Option<String>,
    pub outputs: Vec<String>,
    pub validation: Option<ValidationSummary>,
    pub config: RunConfig,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn begin(command: &str, config: &RunConfig, workers: usize) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            workers,
            started_at: now(),
            finished_at: None,
            status: RunStatus::Running,
            exit_code: None,
            message: None,
            outputs: Vec::new(),
            validation: None,
            config: config.clone(),
        }
    }

    pub fn finish(&mut self, exit_code: i32, message: Option<String>) {
        self.finished_at = Some(now());
        self.exit_code = Some(exit_code);
        self.status = if exit_code == 0 {
            RunStatus::Succeeded
        } else {
            RunStatus::Failed
        };
        self.message = message;
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}
