//! Flat `key = value` text with `#` comments, shared by experiment configs
//! and game files. Every lookup remembers the line it came from so errors
//! point at the offending field.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Entry {
    pub line: usize,
    pub value: String,
}

#[derive(Clone, Debug)]
pub struct KvFile {
    file: String,
    entries: BTreeMap<String, Entry>,
}

impl KvFile {
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(config_err(file, line, format!("expected `key = value`, got `{body}`")));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || "._".contains(c)) {
                return Err(config_err(file, line, format!("malformed key `{key}`")));
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(config_err(
                    file,
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
        }
        Ok(KvFile {
            file: file.to_string(),
            entries,
        })
    }

    pub fn file(&self) -> &str {
        &self.file
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.line))
    }

    /// Error at the line of `key`, or line 0 if it is absent.
    pub fn err(&self, key: &str, message: impl Into<String>) -> Error {
        let line = self.entries.get(key).map_or(0, |e| e.line);
        config_err(&self.file, line, message.into())
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.get(key)
            .map(|e| e.value.as_str())
            .ok_or_else(|| self.err(key, format!("missing required key `{key}`")))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        e.value
            .parse()
            .map(Some)
            .map_err(|_| self.err(key, format!("`{key}`: cannot parse `{}`", e.value)))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| self.err(key, format!("missing required key `{key}`")))
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma- or whitespace-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        split_list(&e.value)
            .map(|item| {
                item.parse()
                    .map_err(|_| self.err(key, format!("`{key}`: cannot parse list item `{item}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

pub fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

pub(crate) fn config_err(file: &str, line: usize, message: String) -> Error {
    Error::Config {
        file: file.to_string(),
        line,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let kv = KvFile::parse("t", "# header\na.b = 3  # trailing\n\nc = 1, 2 3\n").unwrap();
        assert_eq!(kv.required::<u32>("a.b").unwrap(), 3);
        assert_eq!(kv.list::<u32>("c").unwrap().unwrap(), vec![1, 2, 3]);
        assert_eq!(kv.or("missing", 9u8).unwrap(), 9);
    }

    #[test]
    fn errors_carry_lines() {
        let err = KvFile::parse("cfg", "a = 1\nnot a pair\n").unwrap_err();
        assert_eq!(err.to_string(), "cfg:2: expected `key = value`, got `not a pair`");
        let err = KvFile::parse("cfg", "a = 1\n\na = 2\n").unwrap_err();
        assert!(err.to_string().starts_with("cfg:3: duplicate key `a`"));
        let kv = KvFile::parse("cfg", "x = 1\ny = oops\n").unwrap();
        assert_eq!(
            kv.required::<f64>("y").unwrap_err().to_string(),
            "cfg:2: `y`: cannot parse `oops`"
        );
    }
}
