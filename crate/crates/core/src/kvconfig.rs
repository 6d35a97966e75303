//! Plain-text `key = number` files used for device calibrations and memory
//! configurations.
//!
//! Grammar, one record per line:
//!
//! ```text
//! line    := blank | comment | record
//! comment := '#' any*
//! record  := key ws* '=' ws* number ws* comment?
//! key     := segment ('.' segment)*      segment := [A-Za-z0-9_-]+
//! ```
//!
//! Keys are unique within a file. Numbers use Rust's `f64` syntax.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    source: PathBuf,
    values: BTreeMap<String, f64>,
}

impl KvConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, source: impl Into<PathBuf>) -> Result<Self> {
        let source = source.into();
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Parse {
                path: source.clone(),
                line: line_no,
                message,
            };
            let line = raw.split_once('#').map_or(raw, |(head, _)| head).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let valid_key = !key.is_empty()
                && key.split('.').all(|seg| {
                    !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                });
            if !valid_key {
                return Err(err(format!("invalid key {key:?}")));
            }
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid number {:?} for {key}", value.trim())))?;
            if !value.is_finite() {
                return Err(err(format!("non-finite value for {key}")));
            }
            if values.insert(key.to_string(), value).is_some() {
                return Err(err(format!("duplicate key {key}")));
            }
        }
        Ok(Self { source, values })
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.get(key).ok_or_else(|| Error::Parse {
            path: self.source.clone(),
            line: 0,
            message: format!("missing key {key}"),
        })
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    /// Entries directly below `prefix.` whose last segment is an integer,
    /// e.g. `encode.vit.batch.4`.
    pub fn indexed(&self, prefix: &str) -> Result<BTreeMap<usize, f64>> {
        let lead = format!("{prefix}.");
        let mut out = BTreeMap::new();
        for (k, &v) in self.values.range(lead.clone()..) {
            let Some(rest) = k.strip_prefix(&lead) else { break };
            let idx = rest.parse::<usize>().map_err(|_| Error::Parse {
                path: self.source.clone(),
                line: 0,
                message: format!("key {k} must end in an integer index"),
            })?;
            out.insert(idx, v);
        }
        Ok(out)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}
