//! Workflow properties files with multivalued sweep entries.
//!
//! Plain entries are `key=value`. A line of the form `@key@ v1 v2 v3` declares
//! a multivalued entry that is expanded into one run per value.

use std::fmt::Write as _;

use indexmap::IndexMap;
use thiserror::Error;

use crate::template::is_placeholder;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertiesError {
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: multivalued key `{key}` has no values")]
    EmptyMulti { key: String, line: usize },
    #[error("line {line}: key `{key}` is declared both as a plain and a multivalued property")]
    KeyInBothForms { key: String, line: usize },
    #[error("line {line}: cannot parse `{text}`")]
    Malformed { text: String, line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyValue {
    Single(String),
    Multi(Vec<String>),
}

/// Ordered properties; a key is either single or multivalued, never both.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertySet {
    entries: IndexMap<String, PropertyValue>,
}

impl PropertySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&PropertyValue> {
        self.entries.get(key)
    }

    pub fn single(&self, key: &str) -> Option<&str> {
        match self.entries.get(key) {
            Some(PropertyValue::Single(v)) => Some(v),
            _ => None,
        }
    }

    pub fn singles(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().filter_map(|(k, v)| match v {
            PropertyValue::Single(s) => Some((k.as_str(), s.as_str())),
            PropertyValue::Multi(_) => None,
        })
    }

    pub fn multis(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().filter_map(|(k, v)| match v {
            PropertyValue::Multi(vals) => Some((k.as_str(), vals.as_slice())),
            PropertyValue::Single(_) => None,
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &PropertyValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or overwrites a plain entry, keeping the original position of an existing key.
    pub fn set_single(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), PropertyValue::Single(value.into()));
    }

    pub fn set_multi(&mut self, key: impl Into<String>, values: Vec<String>) {
        self.entries.insert(key.into(), PropertyValue::Multi(values));
    }

    /// Renders plain entries as `key=value` lines; multivalued entries use the `@key@ ...` form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            match v {
                PropertyValue::Single(s) => writeln!(out, "{k}={s}"),
                PropertyValue::Multi(vals) => writeln!(out, "@{k}@ {}", vals.join(" ")),
            }
            .expect("write to string");
        }
        out
    }
}

/// Parses a properties file.
///
/// Blank lines and lines starting with `#` are ignored. Keys and values are trimmed.
pub fn parse_properties(text: &str) -> Result<PropertySet, PropertiesError> {
    let mut set = PropertySet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }

        let first = line.split_whitespace().next().unwrap_or_default();
        if is_placeholder(first) {
            let key = &first[1..first.len() - 1];
            let values: Vec<String> = line[first.len()..]
                .split_whitespace()
                .map(str::to_owned)
                .collect();
            match set.entries.get(key) {
                Some(PropertyValue::Single(_)) => {
                    return Err(PropertiesError::KeyInBothForms {
                        key: key.to_owned(),
                        line: line_no,
                    })
                }
                Some(PropertyValue::Multi(_)) => {
                    return Err(PropertiesError::DuplicateKey {
                        key: key.to_owned(),
                        line: line_no,
                    })
                }
                None => {}
            }
            if values.is_empty() {
                return Err(PropertiesError::EmptyMulti {
                    key: key.to_owned(),
                    line: line_no,
                });
            }
            set.entries.insert(key.to_owned(), PropertyValue::Multi(values));
            continue;
        }

        let (key, value) = line.split_once('=').ok_or_else(|| PropertiesError::Malformed {
            text: line.to_owned(),
            line: line_no,
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(PropertiesError::Malformed {
                text: line.to_owned(),
                line: line_no,
            });
        }
        match set.entries.get(key) {
            Some(PropertyValue::Multi(_)) => {
                return Err(PropertiesError::KeyInBothForms {
                    key: key.to_owned(),
                    line: line_no,
                })
            }
            Some(PropertyValue::Single(_)) => {
                return Err(PropertiesError::DuplicateKey {
                    key: key.to_owned(),
                    line: line_no,
                })
            }
            None => {}
        }
        set.entries
            .insert(key.to_owned(), PropertyValue::Single(value.trim().to_owned()));
    }
    Ok(set)
}
