//! Helpers for the line-oriented text files the toolkit reads and writes.
//!
//! Every file starts with `# key=value` metadata lines; the body format is
//! file specific.

use std::collections::BTreeMap;

use crate::error::{PufError, Result};

/// `# key=value` lines at the top of a file, in order of appearance.
pub fn header(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map_while(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Non-comment, non-blank lines.
pub fn body(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn key_values(text: &str, what: &'static str) -> Result<BTreeMap<String, String>> {
    body(text)
        .map(|(n, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| PufError::format(what, format!("line {n}: expected key=value")))
        })
        .collect()
}

pub fn field<'a>(map: &'a BTreeMap<String, String>, key: &str, what: &'static str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| PufError::format(what, format!("missing {key}")))
}

pub fn parse_field<T>(map: &BTreeMap<String, String>, key: &str, what: &'static str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    field(map, key, what)?
        .parse()
        .map_err(|e| PufError::format(what, format!("{key}: {e}")))
}
