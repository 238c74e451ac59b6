//! Flat `name = value` configuration files.
//!
//! One entry per line, `#` starts a comment. Every module pulls the keys it
//! understands out of a [`KvConfig`]; whatever is left over at the end is
//! reported as an unknown key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, Entry>,
    /// Every value that was read or defaulted, for the run manifest.
    resolved: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `name = value`, got `{body}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config {
                    line,
                    msg: format!("bad key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(Error::Config {
                    line,
                    msg: format!("missing value for `{key}`"),
                });
            }
            let prev = entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
            if let Some(prev) = prev {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key `{key}` (first set on line {})", prev.line),
                });
            }
        }
        Ok(KvConfig {
            entries,
            resolved: BTreeMap::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Entry { value, line }) => {
                let parsed = value.parse::<T>().map_err(|_| Error::Config {
                    line,
                    msg: format!("cannot parse value `{value}` for `{key}`"),
                })?;
                self.resolved.insert(key.to_string(), value);
                Ok(Some(parsed))
            }
        }
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.take_parsed::<f64>(key)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), format!("{v}"));
        Ok(v)
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self.take_parsed::<usize>(key)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), format!("{v}"));
        Ok(v)
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        let v = self.take_parsed::<u64>(key)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), format!("{v}"));
        Ok(v)
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        let line = self.entries.get(key).map(|e| e.line).unwrap_or(0);
        let v = match self.take_parsed::<String>(key)? {
            None => default,
            Some(s) => match s.as_str() {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" => false,
                _ => {
                    return Err(Error::Config {
                        line,
                        msg: format!("`{key}` must be a boolean, got `{s}`"),
                    })
                }
            },
        };
        self.resolved.insert(key.to_string(), format!("{v}"));
        Ok(v)
    }

    pub fn string_or(&mut self, key: &str, default: &str) -> Result<String> {
        let v = self.take_parsed::<String>(key)?.unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.to_string(), v.clone());
        Ok(v)
    }

    /// Comma-separated list of unsigned integers.
    pub fn index_list(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        let Some(Entry { value, line }) = self.entries.remove(key) else {
            return Ok(None);
        };
        let list = value
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Config {
                line,
                msg: format!("`{key}` must be a comma-separated list of indices"),
            })?;
        self.resolved.insert(key.to_string(), value);
        Ok(Some(list))
    }

    /// Fails if any key was never consumed.
    pub fn finish(&self) -> Result<()> {
        if let Some((key, entry)) = self.entries.iter().next() {
            return Err(Error::Config {
                line: entry.line,
                msg: format!("unknown key `{key}`"),
            });
        }
        Ok(())
    }

    /// All consumed values (explicit or defaulted) as `name = value` lines.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
