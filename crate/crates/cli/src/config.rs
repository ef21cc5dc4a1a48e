//! Pipeline configuration: one YAML file with `${VAR}` interpolation for
//! secrets, unknown-key rejection, and validated defaults.

use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("environment variable {0} referenced by the config is not set")]
    MissingEnv(String),
}

/// Resolved settings with defaults applied.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub gateway: GatewaySettings,
    pub filter: FilterSettings,
    pub pack: PackSettings,
}

#[derive(Debug, Clone)]
pub struct GatewaySettings {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub concurrency: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    pub retry_max_ms: u64,
}

#[derive(Debug, Clone)]
pub struct FilterSettings {
    pub tau: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct PackSettings {
    pub len: usize,
    pub eos: Option<u32>,
    pub pad: Option<u32>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gateway: GatewaySettings {
                base_url: None,
                model: None,
                api_key: std::env::var("OPENAI_API_KEY").ok(),
                concurrency: 8,
                timeout_secs: 60,
                max_retries: 3,
                retry_base_ms: 200,
                retry_max_ms: 5_000,
            },
            filter: FilterSettings {
                tau: 0.9,
                test_fraction: 0.1,
                seed: 0,
                beta: 0.7,
            },
            pack: PackSettings {
                len: 8192,
                eos: None,
                pad: None,
            },
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    gateway: GatewayFile,
    #[serde(default)]
    filter: FilterFile,
    #[serde(default)]
    pack: PackFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GatewayFile {
    base_url: Option<String>,
    model: Option<String>,
    /// Literal key, or `${VAR}` to pull it from the environment.
    api_key: Option<String>,
    /// Name of an environment variable holding the key.
    api_key_env: Option<String>,
    concurrency: Option<usize>,
    timeout_secs: Option<u64>,
    max_retries: Option<u32>,
    retry_base_ms: Option<u64>,
    retry_max_ms: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterFile {
    tau: Option<f64>,
    test_fraction: Option<f64>,
    seed: Option<u64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PackFile {
    len: Option<usize>,
    eos: Option<u32>,
    pad: Option<u32>,
}

/// Loads and validates a config file; `None` yields the defaults.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let mut raw: serde_yaml::Value =
        serde_yaml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    interpolate_env(&mut raw)?;
    let file: ConfigFile =
        serde_yaml::from_value(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(file)
}

/// Expands `${VAR}` inside every string value.
fn interpolate_env(value: &mut serde_yaml::Value) -> Result<(), ConfigError> {
    match value {
        serde_yaml::Value::String(s) => {
            if s.contains("${") {
                *s = expand(s)?;
            }
            Ok(())
        }
        serde_yaml::Value::Sequence(seq) => seq.iter_mut().try_for_each(interpolate_env),
        serde_yaml::Value::Mapping(map) => map.values_mut().try_for_each(interpolate_env),
        _ => Ok(()),
    }
}

fn expand(input: &str) -> Result<String, ConfigError> {
    let mut out = String::with_capacity(input.len());
    let mut rest = input;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let tail = &rest[start + 2..];
        match tail.find('}') {
            Some(end) => {
                let var = &tail[..end];
                let value =
                    std::env::var(var).map_err(|_| ConfigError::MissingEnv(var.to_string()))?;
                out.push_str(&value);
                rest = &tail[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn resolve(file: ConfigFile) -> Result<PipelineConfig, ConfigError> {
    let defaults = PipelineConfig::default();
    let api_key = match (file.gateway.api_key, file.gateway.api_key_env) {
        (Some(key), _) => Some(key),
        (None, Some(var)) => Some(std::env::var(&var).map_err(|_| ConfigError::MissingEnv(var))?),
        (None, None) => defaults.gateway.api_key,
    };
    let config = PipelineConfig {
        gateway: GatewaySettings {
            base_url: file.gateway.base_url,
            model: file.gateway.model,
            api_key,
            concurrency: file.gateway.concurrency.unwrap_or(defaults.gateway.concurrency),
            timeout_secs: file.gateway.timeout_secs.unwrap_or(defaults.gateway.timeout_secs),
            max_retries: file.gateway.max_retries.unwrap_or(defaults.gateway.max_retries),
            retry_base_ms: file.gateway.retry_base_ms.unwrap_or(defaults.gateway.retry_base_ms),
            retry_max_ms: file.gateway.retry_max_ms.unwrap_or(defaults.gateway.retry_max_ms),
        },
        filter: FilterSettings {
            tau: file.filter.tau.unwrap_or(defaults.filter.tau),
            test_fraction: file
                .filter
                .test_fraction
                .unwrap_or(defaults.filter.test_fraction),
            seed: file.filter.seed.unwrap_or(defaults.filter.seed),
            beta: file.filter.beta.unwrap_or(defaults.filter.beta),
        },
        pack: PackSettings {
            len: file.pack.len.unwrap_or(defaults.pack.len),
            eos: file.pack.eos.or(defaults.pack.eos),
            pad: file.pack.pad.or(defaults.pack.pad),
        },
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &PipelineConfig) -> Result<(), ConfigError> {
    let invalid = |field: &str, message: String| {
        Err(ConfigError::Validation {
            field: field.to_string(),
            message,
        })
    };
    if !(0.0..=1.0).contains(&config.filter.tau) {
        return invalid("filter.tau", format!("{} outside [0, 1]", config.filter.tau));
    }
    if !(config.filter.test_fraction > 0.0 && config.filter.test_fraction < 1.0) {
        return invalid(
            "filter.test_fraction",
            format!("{} outside (0, 1)", config.filter.test_fraction),
        );
    }
    if config.filter.beta <= 0.0 {
        return invalid("filter.beta", format!("{} must be positive", config.filter.beta));
    }
    if config.pack.len < 2 {
        return invalid("pack.len", format!("{} must be at least 2", config.pack.len));
    }
    if let (Some(eos), Some(pad)) = (config.pack.eos, config.pack.pad) {
        if eos == pad {
            return invalid("pack.eos", format!("collides with pack.pad (both {eos})"));
        }
    }
    if config.gateway.concurrency == 0 {
        return invalid("gateway.concurrency", "must be at least 1".to_string());
    }
    Ok(())
}
