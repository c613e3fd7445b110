//! Flat `key = value` configuration text with optional `[section]` headers.
//!
//! Sections only group keys; every key must be unique across the file.
//! `#` and `;` start comments.

use std::collections::BTreeMap;
use std::str::FromStr;

use super::ConfigError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(ConfigError::Invalid(format!("line {}: malformed section header", lineno + 1)));
                }
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("line {}: expected `key = value`", lineno + 1)))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(ConfigError::Invalid(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Invalid(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    /// Overrides or adds `key=value`.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("override `{assignment}` is not key=value")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Invalid("override with empty key".into()));
        }
        self.entries.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(ConfigError::Invalid(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let c = ConfigMap::parse("# run\n[scenario]\nn = 100 ; validators\n\n[network]\ndelta=1\n").unwrap();
        assert_eq!(c.get("n"), Some("100"));
        assert_eq!(c.parse_or("delta", 0u8).unwrap(), 1);
        assert_eq!(c.parse_or("epochs", 7u64).unwrap(), 7);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigMap::parse("n 100").is_err());
        assert!(ConfigMap::parse("n = 1\nn = 2").is_err());
        assert!(ConfigMap::parse("[open\n").is_err());
        let c = ConfigMap::parse("n = x").unwrap();
        assert!(c.parse_or("n", 0usize).is_err());
    }

    #[test]
    fn overrides_replace_values() {
        let mut c = ConfigMap::parse("seed = 1").unwrap();
        c.set_override("seed=7").unwrap();
        assert_eq!(c.get("seed"), Some("7"));
        assert!(c.set_override("seed").is_err());
    }
}
