//! Run configuration: the TOML file accepted by `simulate --config`, and the
//! JSON echo written beside every output.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::montecarlo::{DetectorConfig, EmissionModel, SimulationConfig, SourceConfig};
use crate::units::PhysicalParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub events: u64,
    pub seed: u64,
    pub chunk_size: usize,
    pub workers: usize,
    pub model: EmissionModel,
    pub bin_width_ps: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let sim = SimulationConfig::default();
        Self {
            events: sim.n_events,
            seed: sim.seed,
            chunk_size: sim.chunk_size,
            workers: sim.workers,
            model: sim.model,
            bin_width_ps: 1.0,
        }
    }
}

/// Complete description of a run. Serializes back to the same TOML layout
/// it is read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub physics: PhysicalParams,
    pub source: SourceConfig,
    pub detectors: DetectorConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            n_events: self.run.events,
            seed: self.run.seed,
            chunk_size: self.run.chunk_size,
            workers: self.run.workers,
            model: self.run.model,
            physics: self.physics,
            source: self.source,
            detectors: self.detectors,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.run.bin_width_ps.is_finite() && self.run.bin_width_ps > 0.0) {
            return Err(Error::invalid("bin_width_ps", "must be > 0"));
        }
        self.simulation().validate()
    }
}

/// What gets written to `<output>.config.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'static str,
    pub generated_unix_s: u64,
    pub argv: Vec<String>,
    pub config: &'a T,
}

/// `records.csv` -> `records.csv.config.json`.
pub fn echo_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

pub fn write_echo<T: Serialize>(output: &Path, command: &str, config: &T) -> Result<PathBuf> {
    let echo = ConfigEcho {
        command,
        version: env!("CARGO_PKG_VERSION"),
        generated_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        argv: std::env::args().collect(),
        config,
    };
    let path = echo_path(output);
    let text = serde_json::to_string_pretty(&echo).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
