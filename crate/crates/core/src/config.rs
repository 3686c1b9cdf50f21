//! Run configuration: defaults, an optional TOML file, then flag overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::flow::{FlowConfig, DEFAULT_MIN_SPOTTED_LAYERS, DEFAULT_WINDOW};
use crate::plot::YRange;

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "FLUIDSCORE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("window_size must be at least 2, got {0}")]
    WindowSize(usize),
    #[error("turbulence_min_layers_with_spots must be at least 2, got {0}")]
    MinLayers(usize),
    #[error("y_range must be `auto` or `table6`, got `{0}`")]
    YRange(String),
}

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub window_size: Option<usize>,
    pub turbulence_min_layers_with_spots: Option<usize>,
    pub y_range: Option<String>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub window_size: usize,
    pub turbulence_min_layers_with_spots: usize,
    pub y_range: YRange,
    pub out: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            window_size: DEFAULT_WINDOW,
            turbulence_min_layers_with_spots: DEFAULT_MIN_SPOTTED_LAYERS,
            y_range: YRange::Auto,
            out: None,
        }
    }
}

pub fn parse_y_range(s: &str) -> Result<YRange, ConfigError> {
    match s {
        "auto" => Ok(YRange::Auto),
        "table6" => Ok(YRange::Table6),
        other => Err(ConfigError::YRange(other.to_string())),
    }
}

impl Config {
    /// Applies file values over the defaults, then `overrides` over both,
    /// and validates the result.
    pub fn resolve(file: Option<ConfigFile>, overrides: ConfigFile) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        for layer in file.into_iter().chain(std::iter::once(overrides)) {
            if let Some(w) = layer.window_size {
                c.window_size = w;
            }
            if let Some(m) = layer.turbulence_min_layers_with_spots {
                c.turbulence_min_layers_with_spots = m;
            }
            if let Some(r) = layer.y_range {
                c.y_range = parse_y_range(&r)?;
            }
            if let Some(o) = layer.out {
                c.out = Some(o);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window_size < 2 {
            return Err(ConfigError::WindowSize(self.window_size));
        }
        if self.turbulence_min_layers_with_spots < 2 {
            return Err(ConfigError::MinLayers(
                self.turbulence_min_layers_with_spots,
            ));
        }
        Ok(())
    }

    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            window: self.window_size,
            min_spotted_layers: self.turbulence_min_layers_with_spots,
        }
    }
}
