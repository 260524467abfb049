//! The retrievability manifest: the answer path, the leaf it reached and the
//! metadata collected there, as a byte-stable JSON document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{format_utc, parse_utc, Clock};
use crate::fields::{check_value, FieldValue};
use crate::report::{Finding, Location, ValidationReport};
use crate::traversal::TraversalSession;
use crate::tree::{DecisionTree, Step};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE_NAME: &str = "retrievability.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievabilityManifest {
    pub manifest_version: u32,
    pub tree_id: String,
    pub tree_version: u32,
    pub created_utc: String,
    pub path: Vec<Step>,
    pub outcome: String,
    pub fields: BTreeMap<String, FieldValue>,
    /// File or URL reference -> lowercase hex SHA-256.
    #[serde(default)]
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("session is not complete; missing: {}", if .missing.is_empty() { "a leaf (still at a question)".to_string() } else { .missing.join(", ") })]
    Incomplete { missing: Vec<String> },
    #[error("malformed manifest at {line}:{column}: {message}")]
    Malformed { line: usize, column: usize, message: String },
}

impl ManifestError {
    pub fn code(&self) -> &'static str {
        match self {
            ManifestError::Incomplete { .. } => "E_INCOMPLETE",
            ManifestError::Malformed { .. } => "E_MALFORMED",
        }
    }
}

/// Builds the manifest for a completed session, stamped with `clock`.
pub fn build_manifest(session: &TraversalSession, clock: &dyn Clock) -> Result<RetrievabilityManifest, ManifestError> {
    if !session.is_complete() {
        return Err(ManifestError::Incomplete { missing: session.missing_fields() });
    }
    let tree = session.tree();
    Ok(RetrievabilityManifest {
        manifest_version: MANIFEST_VERSION,
        tree_id: tree.id.clone(),
        tree_version: tree.version,
        created_utc: format_utc(clock.now()),
        path: session.path().to_vec(),
        outcome: session.current().to_string(),
        fields: session.field_values().clone(),
        checksums: BTreeMap::new(),
    })
}

/// Deterministic JSON: fixed key order, sorted maps, two-space indent,
/// trailing newline.
pub fn serialize_manifest(manifest: &RetrievabilityManifest) -> String {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest is always serializable");
    text.push('\n');
    text
}

pub fn parse_manifest(text: &str) -> Result<RetrievabilityManifest, ManifestError> {
    let manifest: RetrievabilityManifest = serde_json::from_str(text).map_err(|e| ManifestError::Malformed {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let at_key = |key: &str, message: String| {
        let (line, column) = locate_key(text, key);
        ManifestError::Malformed { line, column, message }
    };
    if manifest.manifest_version != MANIFEST_VERSION {
        return Err(at_key(
            "manifest_version",
            format!("unsupported manifest_version {} (expected {MANIFEST_VERSION})", manifest.manifest_version),
        ));
    }
    if parse_utc(&manifest.created_utc).is_none() {
        return Err(at_key(
            "created_utc",
            format!("created_utc {:?} is not YYYY-MM-DDTHH:MM:SSZ", manifest.created_utc),
        ));
    }
    Ok(manifest)
}

fn locate_key(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    text.lines()
        .enumerate()
        .find_map(|(i, line)| line.find(&needle).map(|c| (i + 1, c + 1)))
        .unwrap_or((1, 1))
}

fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Schema-level checks of a manifest against the tree it claims to follow.
pub fn validate_manifest(manifest: &RetrievabilityManifest, tree: &DecisionTree) -> ValidationReport {
    let mut report = ValidationReport::new();
    let key = |k: &str| Location::Key(k.to_string());

    if manifest.manifest_version != MANIFEST_VERSION {
        report.push(Finding::error(
            "E_MALFORMED",
            key("manifest_version"),
            format!("unsupported manifest_version {}", manifest.manifest_version),
        ));
    }
    if parse_utc(&manifest.created_utc).is_none() {
        report.push(Finding::error(
            "E_MALFORMED",
            key("created_utc"),
            format!("{:?} is not YYYY-MM-DDTHH:MM:SSZ", manifest.created_utc),
        ));
    }
    if manifest.tree_id != tree.id || manifest.tree_version != tree.version {
        report.push(Finding::error(
            "E_TREE_MISMATCH",
            key("tree_id"),
            format!(
                "manifest follows {} v{}, validating against {} v{}",
                manifest.tree_id, manifest.tree_version, tree.id, tree.version
            ),
        ));
    }

    let Some(leaf) = tree.node(&manifest.outcome).ok().and_then(|n| n.as_leaf()) else {
        report.push(Finding::error(
            "E_PATH_MISMATCH",
            key("outcome"),
            format!("{} is not a leaf of {}", manifest.outcome, tree.id),
        ));
        return report;
    };
    match tree.follow(&manifest.path) {
        Err(message) => report.push(Finding::error("E_PATH_MISMATCH", key("path"), message)),
        Ok(end) if end.id() != manifest.outcome => report.push(Finding::error(
            "E_PATH_MISMATCH",
            key("path"),
            format!("path ends at {} but outcome is {}", end.id(), manifest.outcome),
        )),
        Ok(_) => {}
    }

    for req in &leaf.fields {
        let loc = Location::Key(format!("fields.{}", req.id));
        match manifest.fields.get(&req.id) {
            Some(value) if !value.is_empty() => {
                if let Err(message) = check_value(req.field_type, value) {
                    report.push(Finding::error("E_FIELD_SYNTAX", loc, message));
                }
            }
            _ if req.required => {
                report.push(Finding::error("E_MISSING_FIELD", loc, format!("required field {} is missing", req.id)));
            }
            _ => report.push(Finding::info("W_OPTIONAL_ABSENT", loc, format!("optional field {} not provided", req.id))),
        }
    }
    for id in manifest.fields.keys().filter(|id| leaf.field(id).is_none()) {
        report.push(Finding::error(
            "E_UNKNOWN_FIELD",
            Location::Key(format!("fields.{id}")),
            format!("{} does not declare a field {id}", leaf.id),
        ));
    }
    for (reference, digest) in &manifest.checksums {
        if reference.trim().is_empty() || !is_sha256_hex(digest) {
            report.push(Finding::error(
                "E_CHECKSUM_SYNTAX",
                Location::Key(format!("checksums.{reference}")),
                "checksum entries map a non-empty reference to 64 lowercase hex digits",
            ));
        }
    }
    report
}
