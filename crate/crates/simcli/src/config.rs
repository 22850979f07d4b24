//! Resolving the experiment configuration from a preset, a TOML file and
//! `--set` overrides.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use simkit_core::engine::set_parameter;
use simkit_core::{ConfigError, ExperimentConfig};

/// Preset used as the base layer when only a config file is given.
pub const DEFAULT_PRESET: &str = "paper";

pub struct Sources<'a> {
    pub preset: Option<&'a str>,
    pub config: Option<&'a Path>,
    pub overrides: &'a [String],
    pub seed: Option<u64>,
}

pub fn resolve(src: &Sources<'_>) -> Result<ExperimentConfig, ConfigError> {
    if src.preset.is_none() && src.config.is_none() {
        return Err(ConfigError::new(
            "config",
            "no configuration given; pass --config PATH or --preset NAME",
        ));
    }
    let name = src.preset.unwrap_or(DEFAULT_PRESET);
    let mut cfg = ExperimentConfig::preset(name)
        .ok_or_else(|| ConfigError::new("preset", format!("unknown preset `{name}`")))?;
    if let Some(path) = src.config {
        cfg = merge_file(&cfg, path)?;
    }
    for item in src.overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::new(item.as_str(), "override must look like key=value"))?;
        cfg = set_parameter(&cfg, key.trim(), parse_value(raw.trim()))?;
    }
    if let Some(seed) = src.seed {
        cfg = set_parameter(&cfg, "scenario.seed", Value::from(seed))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Interprets an override value as a TOML literal, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut table) => toml_to_json(table.remove("v").expect("key parsed")),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn merge_file(base: &ExperimentConfig, path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let field = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| ConfigError::new(&field, e.to_string()))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::new(&field, e.to_string()))?;
    let mut root = serde_json::to_value(base).expect("config serializes");
    merge(&mut root, toml_to_json(toml::Value::Table(table)), "")?;
    serde_json::from_value(root).map_err(|e| ConfigError::new(field, e.to_string()))
}

/// Overlays `patch` on `base`. Tables merge key by key; anything else replaces.
fn merge(base: &mut Value, patch: Value, path: &str) -> Result<(), ConfigError> {
    match (base, patch) {
        (Value::Object(dst), Value::Object(src)) => merge_tables(dst, src, path),
        (slot, value) => {
            *slot = value;
            Ok(())
        }
    }
}

fn merge_tables(dst: &mut Map<String, Value>, src: Map<String, Value>, path: &str) -> Result<(), ConfigError> {
    for (key, value) in src {
        let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        match dst.get_mut(&key) {
            Some(slot) => merge(slot, value, &full)?,
            None => return Err(ConfigError::new(full, "unknown configuration key")),
        }
    }
    Ok(())
}

fn toml_to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => serde_json::Number::from_f64(f).map_or(Value::Null, Value::Number),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(items) => Value::Array(items.into_iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()),
    }
}
