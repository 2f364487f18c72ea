//! System configuration: TOML schema, validation, and parameter overrides
//! by dotted path for sweeps.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustic::{AcousticLinkParams, MarkovGainChain};
use crate::energy::{energy_units, BatteryParams, HarvestModel, PowerLevels};
use crate::optical::OpticalLinkParams;

/// The bundled reference configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown parameter path `{0}`")]
    UnknownParameter(String),
}

impl ConfigError {
    fn invalid(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::Invalid { path: path.into(), message: message.to_string() }
    }
}

/// How an episode's horizon is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Infinite horizon with per-slot discount Γ^k, truncated once the tail is negligible.
    Discounted,
    /// Geometric lifetime K with mean 1/(1-Γ), undiscounted sum over k < K.
    Lifetime,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Discounted => "discounted",
            EvalMode::Lifetime => "lifetime",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    /// Capacity B^max in energy units.
    pub capacity: f64,
    pub slot_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestConfig {
    pub probability: f64,
    /// Energy per harvest event E_R, in battery units.
    pub energy: f64,
}

/// Battery component of the initial state: a level or `"max"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialBattery {
    Level(u32),
    Named(String),
}

/// Initial state; gain entries are 0-based level indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub gain_rd: usize,
    pub gain_re: usize,
    pub battery: InitialBattery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub episodes: u64,
    pub master_seed: u64,
    pub mode: EvalMode,
    /// Use the end-to-end min-form secrecy rate with sampled optical SNR
    /// instead of the acoustic-only approximation.
    #[serde(default)]
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Discount factor Γ, the per-slot survival probability.
    pub gamma: f64,
    /// Secrecy-rate threshold R_th in bps.
    pub r_th: f64,
    /// Policy-evaluation stopping tolerance.
    pub epsilon: f64,
    pub power_levels_w: Vec<f64>,
    pub initial_state: InitialStateConfig,
    pub battery: BatteryConfig,
    pub harvest: HarvestConfig,
    pub optical: OpticalLinkParams,
    pub acoustic_d: AcousticLinkParams,
    pub acoustic_e: AcousticLinkParams,
    pub gain_chain_rd: MarkovGainChain,
    pub gain_chain_re: MarkovGainChain,
    pub evaluation: EvaluationConfig,
}

/// Relay state: gain level indices for both acoustic hops and the battery level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RelayState {
    pub gain_rd: usize,
    pub gain_re: usize,
    pub battery: u32,
}

/// Validated, typed view of a [`SystemConfig`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub gamma: f64,
    pub r_th: f64,
    pub epsilon: f64,
    pub power: PowerLevels,
    pub initial_state: RelayState,
    pub battery: BatteryParams,
    pub harvest: HarvestModel,
    pub optical: OpticalLinkParams,
    pub acoustic_d: AcousticLinkParams,
    pub acoustic_e: AcousticLinkParams,
    pub chain_rd: MarkovGainChain,
    pub chain_re: MarkovGainChain,
}

impl SystemConfig {
    /// The bundled reference configuration.
    pub fn reference() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.scenario()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds the validated scenario, reporting the first violation by field path.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ConfigError::invalid("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.r_th >= 0.0) || !self.r_th.is_finite() {
            return Err(ConfigError::invalid("r_th", format!("must be a non-negative number, got {}", self.r_th)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(ConfigError::invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.battery.capacity >= 1.0) {
            return Err(ConfigError::invalid("battery.capacity", "must be at least 1"));
        }
        let capacity = energy_units(self.battery.capacity).ok_or_else(|| {
            ConfigError::invalid("battery.capacity", format!("{} is not an integer number of units", self.battery.capacity))
        })?;
        let battery = BatteryParams::new(capacity, self.battery.slot_seconds)
            .map_err(|e| ConfigError::invalid("battery.slot_seconds", e))?;
        let energy = energy_units(self.harvest.energy).ok_or_else(|| {
            ConfigError::invalid("harvest.energy", format!("{} is not an integer number of units", self.harvest.energy))
        })?;
        let harvest = HarvestModel::new(self.harvest.probability, energy).map_err(|e| {
            let path = if energy == 0 { "harvest.energy" } else { "harvest.probability" };
            ConfigError::invalid(path, e)
        })?;
        let power = PowerLevels::new(self.power_levels_w.clone(), battery.slot_seconds)
            .map_err(|e| ConfigError::invalid("power_levels_w", e))?;
        self.optical
            .validate()
            .map_err(|(field, e)| ConfigError::invalid(format!("optical.{field}"), e))?;
        for (name, link) in [("acoustic_d", &self.acoustic_d), ("acoustic_e", &self.acoustic_e)] {
            link.validate().map_err(|e| ConfigError::invalid(name, e))?;
        }
        if self.acoustic_d.f_min_khz != self.acoustic_e.f_min_khz
            || self.acoustic_d.bandwidth_khz != self.acoustic_e.bandwidth_khz
        {
            return Err(ConfigError::invalid("acoustic_e", "both acoustic hops must share one band"));
        }
        for (name, chain) in [("gain_chain_rd", &self.gain_chain_rd), ("gain_chain_re", &self.gain_chain_re)] {
            chain.validate().map_err(|e| ConfigError::invalid(format!("{name}.transition"), e))?;
        }

        let init = &self.initial_state;
        let battery_level = match &init.battery {
            InitialBattery::Level(level) => *level,
            InitialBattery::Named(name) if name == "max" => capacity,
            InitialBattery::Named(other) => {
                return Err(ConfigError::invalid("initial_state.battery", format!("expected a level or \"max\", got {other:?}")))
            }
        };
        if battery_level > capacity {
            return Err(ConfigError::invalid("initial_state.battery", format!("{battery_level} exceeds capacity {capacity}")));
        }
        if init.gain_rd >= self.gain_chain_rd.len() {
            return Err(ConfigError::invalid("initial_state.gain_rd", "index out of range"));
        }
        if init.gain_re >= self.gain_chain_re.len() {
            return Err(ConfigError::invalid("initial_state.gain_re", "index out of range"));
        }
        if self.evaluation.episodes == 0 {
            return Err(ConfigError::invalid("evaluation.episodes", "must be at least 1"));
        }

        Ok(Scenario {
            gamma: self.gamma,
            r_th: self.r_th,
            epsilon: self.epsilon,
            power,
            initial_state: RelayState { gain_rd: init.gain_rd, gain_re: init.gain_re, battery: battery_level },
            battery,
            harvest,
            optical: self.optical.clone(),
            acoustic_d: self.acoustic_d.clone(),
            acoustic_e: self.acoustic_e.clone(),
            chain_rd: self.gain_chain_rd.clone(),
            chain_re: self.gain_chain_re.clone(),
        })
    }

    /// Returns a copy with the numeric field at dotted `path` replaced by `value`.
    ///
    /// Integer-typed fields accept only integral values. The result is
    /// re-validated.
    pub fn with_param(&self, path: &str, value: f64) -> Result<Self, ConfigError> {
        let mut doc = toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut slot = &mut doc;
        for key in path.split('.') {
            slot = slot
                .get_mut(key)
                .ok_or_else(|| ConfigError::UnknownParameter(path.to_string()))?;
        }
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 || !value.is_finite() {
                    return Err(ConfigError::invalid(path, format!("expects an integer, got {value}")));
                }
                toml::Value::Integer(value as i64)
            }
            _ => return Err(ConfigError::UnknownParameter(path.to_string())),
        };
        let config: Self = doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.scenario()?;
        Ok(config)
    }
}

/// Loads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    SystemConfig::from_toml_str(&text)
}
