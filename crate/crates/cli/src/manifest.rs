//! Provenance block carried by every output file.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub const TOOL: &str = "delu";

/// Prefix of the manifest line at the top of CSV outputs.
pub const CSV_PREFIX: &str = "# manifest ";

/// Everything needed to rerun a command: its name, every parameter after
/// defaults and overrides, the seeds, and the tool version. Wall-clock
/// timings ride along but are not part of the reproducible content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub params: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Milliseconds per phase.
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, params: &impl Serialize, seeds: Vec<u64>) -> Self {
        RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            params: serde_json::to_value(params).expect("parameters serialize"),
            seeds,
            timings_ms: BTreeMap::new(),
        }
    }

    /// Adds `ms` to the running total of `phase`.
    pub fn add_time(&mut self, phase: &str, ms: f64) {
        *self.timings_ms.entry(phase.into()).or_insert(0.0) += ms;
    }

    /// Runs `f` and charges its wall time to `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let (value, ms) = timed(f);
        self.add_time(phase, ms);
        value
    }

    pub fn without_timings(&self) -> Self {
        RunManifest {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn csv_line(&self) -> String {
        format!("{CSV_PREFIX}{}\n", serde_json::to_string(self).expect("manifest serializes"))
    }

    /// The manifest on the first line of a CSV output, if present.
    pub fn from_csv_text(text: &str) -> Option<Self> {
        let line = text.lines().next()?.strip_prefix(CSV_PREFIX)?;
        serde_json::from_str(line).ok()
    }

    /// The manifest stored under the `manifest` key of a JSON output.
    pub fn from_json(value: &serde_json::Value) -> Option<Self> {
        serde_json::from_value(value.get("manifest")?.clone()).ok()
    }
}

/// Result of `f` and its wall time in milliseconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed().as_secs_f64() * 1e3)
}

/// `body` (a JSON object) with the manifest added under `manifest`.
pub fn with_manifest(mut body: serde_json::Value, manifest: &RunManifest) -> serde_json::Value {
    if let Some(map) = body.as_object_mut() {
        map.insert(
            "manifest".into(),
            serde_json::to_value(manifest).expect("manifest serializes"),
        );
    }
    body
}
