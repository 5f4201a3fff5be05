//! Layered settings: built-in defaults, then the config file's global keys,
//! then its `[command]` section, then command-line overrides.
//!
//! Config files are either `key = value` lines with `[command]` headers or a
//! JSON object whose scalar members are global keys and whose object members
//! are command sections. JSON arrays become comma-separated lists.

use std::collections::BTreeMap;

use ffst::format::{parse_key_values, Entry};

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct Settings {
    command: String,
    values: BTreeMap<String, Entry>,
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String, CliError> {
    use serde_json::Value;
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => {
            items.iter().map(|x| json_scalar(key, x)).collect::<Result<Vec<_>, _>>()?.join(",")
        }
        Value::Null | Value::Object(_) => {
            return Err(CliError::Config(format!("config key `{key}`: unsupported JSON value {v}")))
        }
    })
}

/// `(section, key, value)` triples in file order; the global section is `""`.
fn json_entries(text: &str) -> Result<Vec<(String, Entry)>, CliError> {
    let root: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config JSON line {}: {e}", e.line())))?;
    let obj = root.as_object().ok_or_else(|| CliError::Config("config JSON must be an object".into()))?;
    let mut out = Vec::new();
    for (k, v) in obj {
        if let Some(section) = v.as_object() {
            for (sk, sv) in section {
                out.push((k.clone(), Entry { line: 0, key: sk.clone(), value: json_scalar(sk, sv)? }));
            }
        } else {
            out.push((String::new(), Entry { line: 0, key: k.clone(), value: json_scalar(k, v)? }));
        }
    }
    Ok(out)
}

fn file_entries(text: &str) -> Result<Vec<(String, Entry)>, CliError> {
    if text.trim_start().starts_with('{') {
        return json_entries(text);
    }
    Ok(parse_key_values(text)?
        .into_iter()
        .flat_map(|s| {
            let name = s.name;
            s.entries.into_iter().map(move |e| (name.clone(), e))
        })
        .collect())
}

impl Settings {
    /// Layers `file` (if any) and `overrides` for `command`. Sections for
    /// other commands are ignored.
    pub fn load(command: &str, file: Option<&str>, overrides: &[(String, String)]) -> Result<Settings, CliError> {
        let mut s = Settings { command: command.to_string(), values: BTreeMap::new() };
        if let Some(text) = file {
            let entries = file_entries(text)?;
            for pass in ["", command] {
                for (section, e) in entries.iter().filter(|(sec, _)| sec == pass) {
                    let _ = section;
                    s.values.insert(e.key.clone(), e.clone());
                }
            }
        }
        for (k, v) in overrides {
            s.values.insert(k.clone(), Entry { line: 0, key: k.clone(), value: v.clone() });
        }
        Ok(s)
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        for (k, e) in &self.values {
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::from(e.err(format!("unknown key for `{}`", self.command))));
            }
        }
        Ok(())
    }

    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.values.get(key)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.entry(key).map_or(Ok(default), |e| e.parse_f64().map_err(Into::into))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.entry(key).map(|e| e.parse_f64().map_err(Into::into)).transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        self.entry(key).map_or(Ok(default), |e| e.parse_usize().map_err(Into::into))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        self.entry(key).map_or(Ok(default), |e| e.parse_u64().map_err(Into::into))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        self.entry(key).map_or(Ok(default), |e| e.parse_bool().map_err(Into::into))
    }

    pub fn opt_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.entry(key).map(|e| e.parse_f64_list().map_err(Into::into)).transpose()
    }

    pub fn opt_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        self.entry(key).map(|e| e.parse_usize_list().map_err(Into::into)).transpose()
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.entry(key).map_or(default, |e| e.value.as_str())
    }

    /// Parses a `FromStr` value, reporting failures against the entry.
    pub fn parsed_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<T>().map_err(|err| CliError::from(e.err(err.to_string()))),
        }
    }
}

/// Sweep grids must be nonempty and strictly increasing.
pub fn check_grid<T: PartialOrd + Copy>(name: &str, grid: &[T]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Config(format!("`{name}` must not be empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!("`{name}` must be strictly increasing")));
    }
    Ok(())
}
