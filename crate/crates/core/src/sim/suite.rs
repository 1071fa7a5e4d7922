//! Experiment suites: a base config expanded over a grid of field values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Suite file as written on disk. Each block merges `base` with every
/// combination of `grid` values (keys in sorted order, last key varying
/// fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    #[serde(default)]
    pub base: Map<String, Value>,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
}

/// A fully resolved list of experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub experiments: Vec<ExperimentConfig>,
}

const PRESETS: &[(&str, &str)] = &[
    ("table2", include_str!("../../presets/table2.json")),
    ("table3", include_str!("../../presets/table3.json")),
    ("table4", include_str!("../../presets/table4.json")),
    ("table5", include_str!("../../presets/table5.json")),
    ("table6", include_str!("../../presets/table6.json")),
    ("table7", include_str!("../../presets/table7.json")),
    ("table8", include_str!("../../presets/table8.json")),
    ("table9", include_str!("../../presets/table9.json")),
    ("fig1", include_str!("../../presets/fig1.json")),
    ("fig4", include_str!("../../presets/fig4.json")),
    ("fig6", include_str!("../../presets/fig6.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Result<SuiteSpec> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            Error::contract(format!(
                "unknown preset '{name}'; available: {}",
                preset_names().join(", ")
            ))
        })?;
    Ok(serde_json::from_str(text)?)
}

impl SuiteSpec {
    /// A suite holding exactly one config.
    pub fn single(config: &ExperimentConfig) -> Result<Self> {
        let Value::Object(base) = serde_json::to_value(config)? else {
            return Err(Error::contract("config did not serialize to an object"));
        };
        Ok(SuiteSpec {
            name: config.label.clone().unwrap_or_else(|| "experiment".into()),
            description: String::new(),
            blocks: vec![Block {
                base,
                grid: BTreeMap::new(),
            }],
        })
    }

    /// Expands every block, applies `overrides` to each config and
    /// validates the result.
    pub fn resolve(&self, overrides: &Map<String, Value>) -> Result<Suite> {
        let mut experiments = Vec::new();
        for block in &self.blocks {
            for mut obj in expand(block) {
                for (k, v) in overrides {
                    obj.insert(k.clone(), v.clone());
                }
                let mut cfg: ExperimentConfig = serde_json::from_value(Value::Object(obj))?;
                if cfg.label.is_none() {
                    cfg.label = Some(default_label(&cfg));
                }
                cfg.validate()
                    .map_err(|e| Error::contract(format!("{}: {e}", cfg.label.as_deref().unwrap_or(""))))?;
                experiments.push(cfg);
            }
        }
        if experiments.is_empty() {
            return Err(Error::contract("suite expands to no experiments"));
        }
        Ok(Suite {
            name: self.name.clone(),
            experiments,
        })
    }
}

fn expand(block: &Block) -> Vec<Map<String, Value>> {
    let mut out = vec![block.base.clone()];
    for (key, values) in &block.grid {
        out = out
            .into_iter()
            .flat_map(|obj| {
                values.iter().map(move |v| {
                    let mut o = obj.clone();
                    o.insert(key.clone(), v.clone());
                    o
                })
            })
            .collect();
    }
    out
}

fn default_label(cfg: &ExperimentConfig) -> String {
    let mut s = format!("{} t={}", cfg.method.name(), cfg.t);
    if let Some(k) = cfg.k {
        s.push_str(&format!(" k={k}"));
    }
    s
}
