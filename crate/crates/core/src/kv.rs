//! Plain-text `key = value` files with `#` comments.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered key/value entries as they appear in the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String)>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got `{line}`", lineno + 1))
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.push((key.to_string(), v.trim().to_string()));
        }
        Ok(KvFile { entries })
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    /// Last value for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
        parse_value(key, raw)
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key).map(|raw| parse_value(key, raw)).transpose()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

pub fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`")))
}

pub fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("key `{key}`: `{raw}` is not a boolean"))),
    }
}

pub fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

pub fn join<T: Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KvFile::parse("# header\n a = 1 # trailing\n\nb=two\n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("two"));
        assert_eq!(kv.require::<u32>("a").unwrap(), 1);
        assert!(kv.require::<u32>("b").is_err());
        assert!(kv.require::<u32>("c").is_err());
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(KvFile::parse("just words\n").is_err());
        assert!(KvFile::parse(" = 3\n").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut kv = KvFile::new();
        kv.push("x", 1.5);
        kv.push("list", join(&[1, 2, 3]));
        let back = KvFile::parse(&kv.render()).unwrap();
        assert_eq!(back, kv);
        assert_eq!(parse_list::<u32>("list", back.get("list").unwrap()).unwrap(), [1, 2, 3]);
    }
}
