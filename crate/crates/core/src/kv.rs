//! Flat `key = value` text blocks used for reports and run metadata.

use std::fmt::Display;
use std::path::Path;

use crate::{DemixError, Result};

/// Ordered list of key/value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvBlock {
    entries: Vec<(String, String)>,
}

impl KvBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn extend(&mut self, other: &KvBlock) -> &mut Self {
        self.entries.extend(other.entries.iter().cloned());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// One `key<sep>value` pair per line.
    pub fn render(&self, sep: &str) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(sep);
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Parses `key=value` or `key = value` lines; blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut block = KvBlock::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| DemixError::Parse {
                path: origin.to_path_buf(),
                line: k + 1,
                message: format!("expected key=value, found {line:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(DemixError::Parse { path: origin.to_path_buf(), line: k + 1, message: "empty key".into() });
            }
            block.push(key, value.trim());
        }
        Ok(block)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| DemixError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: impl AsRef<Path>, sep: &str) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render(sep)).map_err(|source| DemixError::Io { path: path.to_path_buf(), source })
    }
}
