use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::pipelines::{Combine, Method};
use crate::simulation::ScenarioConfig;

/// Settings of a cross-validation run on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    /// Imputations K.
    pub k: usize,
    /// Folds L.
    pub folds: usize,
    /// Independent repetitions of the whole cross-validation.
    pub replicates: usize,
    pub horizons: Vec<f64>,
    pub combine: Combine,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Ap1],
            k: 10,
            folds: 10,
            replicates: 1,
            horizons: vec![12.0, 60.0],
            combine: Combine::Mean,
            seed: 1,
            input: None,
            spec: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods configured".into()));
        }
        if self.k < 1 || self.folds < 1 || self.replicates < 1 {
            return Err(Error::Parameter("K, L and replicates must be at least 1".into()));
        }
        if self.horizons.is_empty()
            || self.horizons.iter().any(|t| !(*t > 0.0 && t.is_finite()))
            || self.horizons.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Parameter(
                "horizons must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Settings of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub methods: Vec<Method>,
    pub scenario: ScenarioConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Ap1, Method::Ap2A, Method::Ap2B],
            scenario: ScenarioConfig::default(),
            output: None,
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Parameter("no methods configured".into()));
        }
        self.scenario.validate()
    }
}

/// Serializes `base` to a TOML table, overlays the keys of `overrides`
/// (recursively for tables) and deserializes the result.
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, overrides: &toml::Table) -> Result<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Serialization(e.to_string()))?;
    merge(&mut table, overrides);
    table.try_into().map_err(|e: toml::de::Error| Error::Serialization(e.to_string()))
}

fn merge(into: &mut toml::Table, from: &toml::Table) {
    for (key, value) in from {
        match (into.get_mut(key), value) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            _ => {
                into.insert(key.clone(), value.clone());
            }
        }
    }
}

/// Reads a TOML file as a table.
pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::Serialization(e.to_string()))
        .context_with(|| format!("config file {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_base() {
        let base = RunConfig {
            k: 3,
            seed: 9,
            ..RunConfig::default()
        };
        let file: toml::Table = "k = 20\nmethods = [\"ap2B\", \"nv1\"]".parse().unwrap();
        let merged = overlay(&base, &file).unwrap();
        assert_eq!(merged.k, 20);
        assert_eq!(merged.seed, 9);
        assert_eq!(merged.methods, vec![Method::Ap2B, Method::Nv1]);
    }

    #[test]
    fn nested_scenario_override() {
        let file: toml::Table = "[scenario]\nn = 77\nmechanism = \"mar\"".parse().unwrap();
        let merged = overlay(&SimulateConfig::default(), &file).unwrap();
        assert_eq!(merged.scenario.n, 77);
        assert_eq!(merged.scenario.lambda, 0.0073);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let file: toml::Table = "kk = 1".parse().unwrap();
        assert!(overlay(&RunConfig::default(), &file).is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.validate().unwrap();
        c.horizons = vec![60.0, 12.0];
        assert!(c.validate().is_err());
    }
}
