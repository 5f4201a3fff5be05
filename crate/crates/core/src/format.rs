//! Number formatting and the line-oriented `key = value` reader shared by the
//! chain config and the CLI.

use crate::error::{Error, Result};

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", ")
}

/// One `key = value` entry with its 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// A `[section]` of entries. Entries before the first header land in the
/// section named `""`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }
}

/// Parses `key = value` lines. `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section::default()];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: format!("unterminated section header `{body}`"),
            })?;
            sections.push(Section { name: name.trim().to_string(), entries: Vec::new() });
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, found `{body}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { line, message: "empty key".into() });
        }
        sections
            .last_mut()
            .expect("at least one section")
            .entries
            .push(Entry { line, key: key.to_string(), value: value.trim().to_string() });
    }
    Ok(sections)
}

impl Entry {
    pub fn parse_f64(&self) -> Result<f64> {
        self.value.parse::<f64>().map_err(|e| self.err(format!("`{}`: {e}", self.value)))
    }

    pub fn parse_u64(&self) -> Result<u64> {
        self.value.parse::<u64>().map_err(|e| self.err(format!("`{}`: {e}", self.value)))
    }

    pub fn parse_usize(&self) -> Result<usize> {
        self.value.parse::<usize>().map_err(|e| self.err(format!("`{}`: {e}", self.value)))
    }

    pub fn parse_bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(self.err(format!("`{other}` is not a boolean"))),
        }
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn parse_f64_list(&self) -> Result<Vec<f64>> {
        if self.value.is_empty() {
            return Ok(Vec::new());
        }
        self.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>().map_err(|e| self.err(format!("`{s}`: {e}")))
            })
            .collect()
    }

    pub fn parse_usize_list(&self) -> Result<Vec<usize>> {
        if self.value.is_empty() {
            return Ok(Vec::new());
        }
        self.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<usize>().map_err(|e| self.err(format!("`{s}`: {e}")))
            })
            .collect()
    }

    pub fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.line, message: format!("{}: {}", self.key, message.into()) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sections_and_line_numbers() {
        let text = "a = 1\n\n[sweep]\n# note\nb = 2, 3\nbad line\n";
        let err = parse_key_values(text).unwrap_err();
        assert_eq!(err, Error::Parse { line: 6, message: "expected `key = value`, found `bad line`".into() });

        let secs = parse_key_values("a = 1\n[sweep]\nb = 2, 3 # trailing\n").unwrap();
        assert_eq!(secs.len(), 2);
        assert_eq!(secs[1].name, "sweep");
        let b = secs[1].get("b").unwrap();
        assert_eq!(b.line, 3);
        assert_eq!(b.parse_f64_list().unwrap(), vec![2.0, 3.0]);
    }
}
