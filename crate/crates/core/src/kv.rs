//! Sectioned `key = value` text files.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! [channel.tls]
//! participation = 1e-3
//! ```
//!
//! Keys before the first header land in the unnamed section `""`. Values
//! are trimmed; surrounding double quotes are stripped.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDocument {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    /// Section names in order of first appearance.
    order: Vec<String>,
}

impl KvDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDocument::default();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line_no, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::parse(line_no, "empty section name"));
                }
                current = name.to_string();
                if !doc.sections.contains_key(&current) {
                    doc.order.push(current.clone());
                    doc.sections.insert(current.clone(), BTreeMap::new());
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            let value = unquote(value.trim());
            if current.is_empty() && !doc.sections.contains_key("") {
                doc.order.push(String::new());
            }
            let section = doc.sections.entry(current.clone()).or_default();
            if section.contains_key(key) {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
            section.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: line_no,
                },
            );
        }
        Ok(doc)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn sections(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn keys(&self, section: &str) -> impl Iterator<Item = &str> {
        self.sections
            .get(section)
            .into_iter()
            .flat_map(|s| s.keys().map(String::as_str))
    }

    /// Parses `section.key` if present.
    pub fn parse_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                Error::parse(e.line, format!("cannot parse `{}` for [{section}] {key}", e.value))
            }),
        }
    }

    pub fn parse_req<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.parse_opt(section, key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}` in section [{section}]")))
    }
}

fn strip_comment(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with('#') || trimmed.starts_with(';') {
        return "";
    }
    match line.find(" #") {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unquote(v: &str) -> &str {
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}
