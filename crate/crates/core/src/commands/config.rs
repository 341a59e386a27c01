//! Flat TOML run configuration: model and training fields side by side,
//! plus a few run-level keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::HybridConfig;
use crate::train::{Strategy, TrainConfig};

const RUN_KEYS: [&str; 3] = ["strategy", "split_seed", "jobs"];

/// Everything that determines a run's numbers, embedded in its reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub strategy: Strategy,
    /// Seed of the fold plan; defaults to the training seed.
    pub split_seed: u64,
    pub jobs: usize,
    /// SHA-256 of the segment file the run read.
    pub data_sha256: Option<String>,
    pub model: HybridConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        let train = TrainConfig::default();
        RunConfig {
            command: command.into(),
            strategy: Strategy::Kfold10,
            split_seed: train.seed,
            jobs: 1,
            data_sha256: None,
            model: HybridConfig::default(),
            train,
        }
    }

    /// Defaults overlaid with `path`, when given.
    pub fn load(command: &str, path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = RunConfig::new(command);
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            cfg.merge_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        }
        Ok(cfg)
    }

    /// Apply a flat TOML document. Unknown keys are rejected.
    pub fn merge_toml(&mut self, text: &str) -> Result<(), String> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let mut model = table_of(&self.model);
        let mut train = table_of(&self.train);
        let split_seed_given = doc.contains_key("split_seed");
        for (k, v) in doc {
            if model.contains_key(&k) {
                model.insert(k, v);
            } else if train.contains_key(&k) {
                train.insert(k, v);
            } else if RUN_KEYS.contains(&k.as_str()) {
                match k.as_str() {
                    "strategy" => {
                        let s = v.as_str().ok_or("strategy must be a string")?;
                        self.strategy = Strategy::parse(s).ok_or_else(|| format!("unknown strategy `{s}`"))?;
                    }
                    "split_seed" => self.split_seed = as_u64(&v, "split_seed")?,
                    _ => self.jobs = as_u64(&v, "jobs")? as usize,
                }
            } else {
                return Err(format!("unknown config key `{k}`"));
            }
        }
        self.model = toml::Value::Table(model).try_into().map_err(|e: toml::de::Error| e.to_string())?;
        self.train = toml::Value::Table(train).try_into().map_err(|e: toml::de::Error| e.to_string())?;
        if !split_seed_given {
            self.split_seed = self.train.seed;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.jobs == 0 {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

fn table_of<T: Serialize>(v: &T) -> toml::Table {
    match toml::Value::try_from(v) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("config structs serialize to tables"),
    }
}

fn as_u64(v: &toml::Value, key: &str) -> Result<u64, String> {
    v.as_integer()
        .and_then(|i| u64::try_from(i).ok())
        .ok_or_else(|| format!("{key} must be a non-negative integer"))
}
