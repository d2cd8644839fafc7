//! `key=value` settings files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored and
//! whitespace around keys and values is trimmed. Every command declares the
//! keys it accepts; anything else is an error. Command-line flags override
//! file values, and the fully resolved settings are written back out next to
//! the command's outputs so the run can be repeated with `--config`.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::io::{read_text, write_text, IoError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: {key} is set twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown setting {key:?} for {command} (accepted: {accepted})")]
    UnknownKey {
        key: String,
        command: String,
        accepted: String,
    },
    #[error("missing required setting {0:?}")]
    Missing(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("{0}")]
    Io(#[from] IoError),
}

/// A key a command accepts, with its default if it has one.
#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
}

pub const fn key(name: &'static str, default: Option<&'static str>) -> Key {
    Key { name, default }
}

/// Parses `key=value` lines into `(line, key, value)` triples.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        if out.iter().any(|(_, seen, _)| seen == k) {
            return Err(ConfigError::Duplicate {
                line: i + 1,
                key: k.to_string(),
            });
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Resolved settings for one command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Settings {
    command: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Defaults, then `file`, then `overrides`. Keys outside `keys` are rejected.
    pub fn resolve(
        command: &str,
        keys: &[Key],
        file: Option<&str>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let known = |k: &str| keys.iter().any(|d| d.name == k);
        let unknown = |k: &str| ConfigError::UnknownKey {
            key: k.to_string(),
            command: command.to_string(),
            accepted: keys.iter().map(|d| d.name).collect::<Vec<_>>().join(", "),
        };
        let mut values: BTreeMap<String, String> = keys
            .iter()
            .filter_map(|d| d.default.map(|v| (d.name.to_string(), v.to_string())))
            .collect();
        if let Some(text) = file {
            for (_, k, v) in parse_key_values(text)? {
                if !known(&k) {
                    return Err(unknown(&k));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in overrides {
            if !known(k) {
                return Err(unknown(k));
            }
            values.insert(k.clone(), v.clone());
        }
        Ok(Settings {
            command: command.to_string(),
            values,
        })
    }

    /// Reads `path` (if given) and resolves against it.
    pub fn load(
        command: &str,
        keys: &[Key],
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let text = path.map(read_text).transpose()?;
        Self::resolve(command, keys, text.as_deref(), overrides)
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// Records a value chosen by the command itself, unless one is already set.
    pub fn fill(&mut self, key: &str, value: impl ToString) {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.require(key)?;
        v.parse().map_err(|e: T::Err| ConfigError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None | Some("") => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, ConfigError> {
        Ok(PathBuf::from(self.require(key)?))
    }

    pub fn path_opt(&self, key: &str) -> Option<PathBuf> {
        self.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    /// Comma-separated list; empty when unset.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn bad_value(&self, key: &str, reason: impl ToString) -> ConfigError {
        ConfigError::BadValue {
            key: key.to_string(),
            value: self.get(key).unwrap_or("").to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# wordorder {}\n", self.command);
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Writes `<output>.config`.
    pub fn persist_next_to(&self, output: &Path) -> Result<PathBuf, ConfigError> {
        let mut name = output.as_os_str().to_owned();
        name.push(".config");
        let path = PathBuf::from(name);
        write_text(&path, &self.to_text())?;
        Ok(path)
    }
}
