//! Metadata field requirements declared on leaves, and per-type value checks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::validators::check_url_syntax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Text,
    Url,
    /// Local file path or URL.
    Path,
    Version,
    /// Flat string-to-string mapping.
    KeyValue,
}

impl FieldType {
    pub const ALL: [FieldType; 5] =
        [FieldType::Text, FieldType::Url, FieldType::Path, FieldType::Version, FieldType::KeyValue];

    pub fn keyword(self) -> &'static str {
        match self {
            FieldType::Text => "text",
            FieldType::Url => "url",
            FieldType::Path => "path",
            FieldType::Version => "version",
            FieldType::KeyValue => "keyvalue",
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for FieldType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        FieldType::ALL.into_iter().find(|t| t.keyword() == s).ok_or(())
    }
}

/// One metadata item a leaf asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRequirement {
    pub id: String,
    #[serde(rename = "type")]
    pub field_type: FieldType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl FieldRequirement {
    pub fn required(id: &str, field_type: FieldType, hint: &str) -> Self {
        Self { id: id.to_string(), field_type, required: true, hint: Some(hint.to_string()) }
    }

    pub fn optional(id: &str, field_type: FieldType, hint: &str) -> Self {
        Self { id: id.to_string(), field_type, required: false, hint: Some(hint.to_string()) }
    }
}

/// A collected field value. Keyvalue fields hold a mapping, everything else text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Text(String),
    Map(BTreeMap<String, String>),
}

impl FieldValue {
    pub fn text(s: impl Into<String>) -> Self {
        FieldValue::Text(s.into())
    }

    pub fn is_empty(&self) -> bool {
        match self {
            FieldValue::Text(s) => s.trim().is_empty(),
            FieldValue::Map(m) => m.is_empty(),
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            FieldValue::Text(s) => Some(s),
            FieldValue::Map(_) => None,
        }
    }
}

impl From<&str> for FieldValue {
    fn from(s: &str) -> Self {
        FieldValue::Text(s.to_string())
    }
}

impl From<String> for FieldValue {
    fn from(s: String) -> Self {
        FieldValue::Text(s)
    }
}

/// Converts entry-time input into the stored shape: keyvalue text such as
/// `lr=0.1; epochs=20` becomes a mapping. Other values pass through.
pub fn normalize(field_type: FieldType, value: FieldValue) -> Result<FieldValue, String> {
    match (field_type, value) {
        (FieldType::KeyValue, FieldValue::Text(text)) => parse_pairs(&text).map(FieldValue::Map),
        (_, value) => Ok(value),
    }
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for item in text.split([';', '\n']).map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {item:?}"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("empty key in {item:?}"));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(format!("duplicate key {key:?}"));
        }
    }
    Ok(map)
}

fn looks_like_url(s: &str) -> bool {
    s.contains("://") || s.starts_with("doi:")
}

/// Syntax check of a stored value against its declared type. Emptiness is the
/// caller's concern.
pub fn check_value(field_type: FieldType, value: &FieldValue) -> Result<(), String> {
    let text = match (field_type, value) {
        (FieldType::KeyValue, FieldValue::Map(map)) => {
            return match map.keys().find(|k| k.trim().is_empty()) {
                Some(_) => Err("keyvalue mapping contains an empty key".into()),
                None => Ok(()),
            };
        }
        (FieldType::KeyValue, FieldValue::Text(_)) => {
            return Err("keyvalue field must be a string-to-string mapping".into());
        }
        (_, FieldValue::Map(_)) => return Err(format!("{field_type} field must be a string")),
        (_, FieldValue::Text(text)) => text,
    };
    match field_type {
        FieldType::Text => Ok(()),
        FieldType::Url => check_url_syntax(text).map(drop).map_err(|e| e.to_string()),
        FieldType::Path => {
            if text.chars().any(char::is_control) {
                Err("path contains control characters".into())
            } else if looks_like_url(text) {
                check_url_syntax(text).map(drop).map_err(|e| e.to_string())
            } else {
                Ok(())
            }
        }
        FieldType::Version => {
            if text.trim().is_empty() {
                Err("version must not be empty".into())
            } else if text.chars().any(char::is_control) {
                Err("version must be a single line".into())
            } else {
                Ok(())
            }
        }
        FieldType::KeyValue => unreachable!(),
    }
}

/// Whether a path-typed value names a local file rather than a URL.
pub fn is_local_path(text: &str) -> bool {
    !looks_like_url(text)
}
