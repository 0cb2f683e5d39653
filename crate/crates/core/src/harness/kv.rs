//! Flat key-value config format.
//!
//! Grammar, line by line:
//!
//! ```text
//! # comment — ignored, as are blank lines
//! section.key = value
//! ```
//!
//! Keys are dotted paths of `[A-Za-z0-9_.-]` characters; values are the
//! remainder of the line after the first `=`, trimmed. There is no quoting
//! or escaping: values are plain text (commas separate list elements by
//! convention). Duplicate keys are an error — silently last-wins config is
//! a classic source of confusing runs.
//!
//! Serialization emits keys in sorted order, one `key = value` line each,
//! so parse → serialize → parse is a fixed point and serialized configs
//! diff cleanly.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// An ordered key → value map with consuming typed getters.
///
/// Config parsing *removes* each key it understands; whatever remains at the
/// end is unrecognized and reported as an error, which catches typos like
/// `trainer.learing_rate` instead of silently ignoring them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

impl KvMap {
    pub fn new() -> KvMap {
        KvMap::default()
    }

    pub fn parse(text: &str) -> Result<KvMap> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(Error::Config(format!(
                    "line {}: invalid key '{key}'",
                    lineno + 1
                )));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(KvMap { entries })
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<KvMap> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KvMap::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Sorted `key = value` lines.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Insert or replace (overrides are allowed to clobber file values).
    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.insert(key.into(), value.to_string());
    }

    /// Apply a `key=value` override string (the CLI's `--set`).
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("override '{spec}' is not of the form key=value"))
        })?;
        let key = key.trim();
        if !valid_key(key) {
            return Err(Error::Config(format!("override has invalid key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keys nothing has consumed yet (sorted).
    pub fn remaining_keys(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// Error if any key is left unconsumed. `context` names the schema the
    /// keys failed to match.
    pub fn expect_consumed(&self, context: &str) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unrecognized {context} key(s): {}",
                self.remaining_keys().join(", ")
            )))
        }
    }

    /// Remove and return a key's raw value.
    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Remove a required key.
    pub fn take_required(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    /// Remove and parse a required key.
    pub fn take_parse<T>(&mut self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        parse_value(key, &self.take_required(key)?)
    }

    /// Remove and parse an optional key, falling back to `default`.
    pub fn take_parse_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.take(key) {
            Some(v) => parse_value(key, &v),
            None => Ok(default),
        }
    }

    /// Remove and parse an optional key.
    pub fn take_parse_opt<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.take(key).map(|v| parse_value(key, &v)).transpose()
    }

    /// Remove a required comma-separated list key.
    pub fn take_list<T>(&mut self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.take_required(key)?;
        raw.split(',')
            .map(|item| parse_value(key, item.trim()))
            .collect()
    }

    /// Remove an optional comma-separated list key, falling back to
    /// `default`.
    pub fn take_list_or<T>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.take(key) {
            Some(raw) => raw
                .split(',')
                .map(|item| parse_value(key, item.trim()))
                .collect(),
            None => Ok(default),
        }
    }
}

fn parse_value<T>(key: &str, raw: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    raw.parse().map_err(|e| {
        Error::Config(format!(
            "key '{key}': cannot parse '{raw}' as {}: {e}",
            std::any::type_name::<T>()
        ))
    })
}
