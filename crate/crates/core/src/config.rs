//! Flat `key = value` training configuration files. `#` starts a comment;
//! unknown or repeated keys are errors.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::neural::TrainConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    BadValue { line: usize, key: String, value: String },
}

/// Network and optimizer settings a configuration file may override.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub train: TrainConfig,
}

pub const KEYS: [&str; 8] = [
    "hidden_width",
    "hidden_layers",
    "initial_lr",
    "lr_decay",
    "lr_floor",
    "max_epochs",
    "minibatch",
    "seed",
];

fn parse<T: std::str::FromStr>(line: usize, key: &str, value: &str, ok: impl Fn(&T) -> bool) -> Result<T, ConfigError> {
    value.parse::<T>().ok().filter(|v| ok(v)).ok_or_else(|| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl TrainSettings {
    pub fn new(hidden_width: usize, train: TrainConfig) -> Self {
        Self {
            hidden_width,
            hidden_layers: 3,
            train,
        }
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            let positive = |v: &f64| v.is_finite() && *v > 0.0;
            match key {
                "hidden_width" => self.hidden_width = parse(line, key, value, |v: &usize| *v > 0)?,
                "hidden_layers" => self.hidden_layers = parse(line, key, value, |v: &usize| *v > 0)?,
                "initial_lr" => self.train.initial_lr_per_sample = parse(line, key, value, positive)?,
                "lr_decay" => self.train.lr_decay = parse(line, key, value, |v: &f64| *v > 0.0 && *v < 1.0)?,
                "lr_floor" => self.train.lr_floor = parse(line, key, value, |v: &f64| v.is_finite() && *v >= 0.0)?,
                "max_epochs" => self.train.max_epochs = parse(line, key, value, |_: &usize| true)?,
                "minibatch" => self.train.minibatch = parse(line, key, value, |v: &usize| *v >= 2)?,
                "seed" => self.train.seed = parse(line, key, value, |_: &u64| true)?,
                _ => unreachable!("key list checked above"),
            }
        }
        Ok(())
    }
}
