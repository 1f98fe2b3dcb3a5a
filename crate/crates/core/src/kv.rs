//! Line-oriented `key = value` text with optional `[section]` headers and
//! `#` comments. Used by the CPU config, board catalog, cost calibration and
//! search-space files.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct KvError {
    pub line: usize,
    pub message: String,
}

impl KvError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    /// Enclosing section, empty for the top level.
    pub section: String,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, KvError> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| KvError::new(line, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(KvError::new(line, "empty section name"));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| KvError::new(line, format!("expected `key = value`, got `{text}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError::new(line, "missing key"));
        }
        out.push(Entry { line, section: section.clone(), key: key.into(), value: value.trim().into() });
    }
    Ok(out)
}

pub fn parse_u64(entry: &Entry) -> Result<u64, KvError> {
    let v = entry.value.replace('_', "");
    let parsed = match v.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => v.parse().ok(),
    };
    parsed.ok_or_else(|| KvError::new(entry.line, format!("`{}` expects an unsigned integer, got `{}`", entry.key, entry.value)))
}
