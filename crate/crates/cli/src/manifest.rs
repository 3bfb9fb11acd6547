use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Provenance of one run. Timestamps live here so every other report is
/// byte-identical across reruns with the same flags.
#[derive(Serialize)]
pub struct RunManifest {
    pub instance: PathBuf,
    pub command: String,
    pub parameters: Value,
    pub artifacts: Vec<String>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub tool_version: String,
}

pub struct Recorder {
    out: PathBuf,
    instance: PathBuf,
    command: &'static str,
    parameters: Value,
    artifacts: Vec<String>,
    manifest_name: &'static str,
    started: SystemTime,
    clock: Instant,
}

impl Recorder {
    pub fn start(
        out: &Path,
        instance: &Path,
        command: &'static str,
        parameters: Value,
    ) -> Result<Self, Failure> {
        std::fs::create_dir_all(out)?;
        Ok(Recorder {
            out: out.to_path_buf(),
            instance: instance.to_path_buf(),
            command,
            parameters,
            artifacts: Vec::new(),
            manifest_name: "manifest.json",
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    /// Writes the manifest under another name, leaving an earlier run's manifest alone.
    pub fn with_manifest_name(mut self, name: &'static str) -> Self {
        self.manifest_name = name;
        self
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Registers `name` (relative to the output directory) as produced.
    pub fn produced(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.path(name), text)?;
        self.produced(name);
        Ok(())
    }

    pub fn finish(self) -> Result<(), Failure> {
        let manifest = RunManifest {
            instance: self.instance,
            command: self.command.to_string(),
            parameters: self.parameters,
            artifacts: self.artifacts,
            started_unix_seconds: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.out.join(self.manifest_name), text)?;
        Ok(())
    }
}
