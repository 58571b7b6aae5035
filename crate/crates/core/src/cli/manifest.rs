use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::patcher::Digest;

/// What a command read, wrote and with which settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, Digest>,
    pub seed: Option<u64>,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub outputs: BTreeMap<String, Digest>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn digest(path: &Path) -> Result<Digest, CliError> {
    Digest::of_file(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

impl RunManifest {
    pub fn start(command: &str, config: impl Serialize, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("serializable config"),
            inputs: BTreeMap::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: String::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Records inputs before they are read, so a changed file shows up.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.insert(path.display().to_string(), digest(path)?);
        Ok(())
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    pub fn finish(mut self, path: &Path) -> Result<Self, CliError> {
        self.finished = now();
        let text = serde_json::to_string_pretty(&self).expect("serializable manifest");
        std::fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(self)
    }
}
