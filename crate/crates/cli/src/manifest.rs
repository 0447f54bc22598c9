//! Run manifest: a JSON record of what was executed, with which resolved
//! configuration, and which files it produced. Re-running a command with the
//! echoed config reproduces the CSV bodies (timing columns excluded).

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use levinv::error::{Error, Result};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub wall_clock_ms: f64,
    pub outputs: Vec<String>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
    #[serde(skip)]
    started: Instant,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C, started: Instant) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_ms: 0.0,
            outputs: Vec::new(),
            extra: serde_json::Map::new(),
            started,
        }
    }

    pub fn push_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn insert_extra(&mut self, key: &str, value: serde_json::Value) {
        self.extra.insert(key.to_string(), value);
    }

    pub fn print(mut self) -> Result<()> {
        self.wall_clock_ms = self.started.elapsed().as_secs_f64() * 1e3;
        let rendered = serde_json::to_string_pretty(&self)
            .map_err(|e| Error::InvalidConfig(format!("manifest serialization failed: {e}")))?;
        println!("{rendered}");
        Ok(())
    }
}
