//! Configuration loading: one TOML file, then `DT_` environment overrides,
//! then the `--seed` flag.
//!
//! `DT_MODELS__K_FOLDS=3` sets `models.k_folds`; `__` separates table levels.
//! Values are parsed as TOML (`true`, `3`, `[1.0, 2.0]`) and fall back to a
//! plain string.

use std::path::{Path, PathBuf};

use distress_core::transfer::PipelineConfig;
use sha2::{Digest, Sha256};

use crate::exit::{CliError, Stage};

pub const ENV_PREFIX: &str = "DT_";

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// Data paths resolved against the config file's directory.
    pub config: PipelineConfig,
    pub path: PathBuf,
    /// SHA-256 of the effective config as canonical JSON, paths as written.
    pub hash: String,
    pub overrides: Vec<String>,
}

fn config_error(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::new(Stage::Config, format!("config: {}: {msg}", path.display()))
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies every `DT_` variable to `table`; returns the dotted keys touched.
pub fn apply_env_overrides<I>(table: &mut toml::Table, env: I) -> Result<Vec<String>, String>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    let mut touched = Vec::new();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_ascii_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(format!("malformed override {key}"));
        }
        let mut node = &mut *table;
        for part in &path[..path.len() - 1] {
            let entry = node.entry(part.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = match entry {
                toml::Value::Table(t) => t,
                _ => return Err(format!("{key}: {part} is not a table")),
            };
        }
        node.insert(path[path.len() - 1].clone(), parse_value(&raw));
        touched.push(path.join("."));
    }
    Ok(touched)
}

/// Parses config text; the directory of `origin` anchors relative data paths.
pub fn parse_config<I>(text: &str, origin: &Path, env: I, seed: Option<u64>) -> Result<LoadedConfig, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut table: toml::Table = text.parse().map_err(|e| config_error(origin, e))?;
    let overrides = apply_env_overrides(&mut table, env).map_err(|e| config_error(origin, e))?;
    if let Some(s) = seed {
        let s = i64::try_from(s).map_err(|_| config_error(origin, "seed must fit in a signed 64-bit integer"))?;
        table.insert("seed".into(), toml::Value::Integer(s));
    }
    let config: PipelineConfig = toml::Value::Table(table).try_into().map_err(|e| config_error(origin, e))?;
    config.validate()?;
    let canonical = serde_json::to_vec(&config).expect("config serializes");
    let hash = hex::encode(Sha256::digest(&canonical));
    let base = origin.parent().unwrap_or(Path::new("."));
    let mut config = config;
    config.data = config.data.resolved(base);
    Ok(LoadedConfig {
        config,
        path: origin.to_path_buf(),
        hash,
        overrides,
    })
}

pub fn load_config<I>(path: &Path, env: I, seed: Option<u64>) -> Result<LoadedConfig, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let text = std::fs::read_to_string(path).map_err(|e| config_error(path, e))?;
    parse_config(&text, path, env, seed)
}
