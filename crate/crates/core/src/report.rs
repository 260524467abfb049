//! Findings produced by tree, manifest and live checks.

use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

/// Where a finding points: a tree element or a manifest key path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Location {
    Tree,
    Node(String),
    Answer { question: String, answer: String },
    Field { leaf: String, field: String },
    Key(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Tree => f.write_str("tree"),
            Location::Node(id) => f.write_str(id),
            Location::Answer { question, answer } => write!(f, "{question}/{answer}"),
            Location::Field { leaf, field } => write!(f, "{leaf}/{field}"),
            Location::Key(path) => f.write_str(path),
        }
    }
}

impl Serialize for Location {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub location: Location,
}

impl Finding {
    pub fn error(code: &'static str, location: Location, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code, message: message.into(), location }
    }

    pub fn warning(code: &'static str, location: Location, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, code, message: message.into(), location }
    }

    pub fn info(code: &'static str, location: Location, message: impl Into<String>) -> Self {
        Self { severity: Severity::Info, code, message: message.into(), location }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}: {}", self.severity, self.code, self.location, self.message)
    }
}

/// Ordered list of findings. A report without error-severity findings is clean.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, finding: Finding) {
        self.findings.push(finding);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.findings.extend(other.findings);
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn has_warnings(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn codes(&self) -> Vec<&'static str> {
        self.findings.iter().map(|f| f.code).collect()
    }

    pub fn count(&self, code: &str) -> usize {
        self.findings.iter().filter(|f| f.code == code).count()
    }
}

impl Serialize for ValidationReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("ValidationReport", 2)?;
        s.serialize_field("clean", &self.is_clean())?;
        s.serialize_field("findings", &self.findings)?;
        s.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_ignores_warnings_and_info() {
        let mut report = ValidationReport::new();
        report.push(Finding::info("W_OPTIONAL_ABSENT", Location::Key("fields.x".into()), "x"));
        report.push(Finding::warning("W_LINK_TIMEOUT", Location::Key("fields.y".into()), "y"));
        assert!(report.is_clean());
        assert!(report.has_warnings());
        report.push(Finding::error("E_MISSING_FIELD", Location::Key("fields.z".into()), "z"));
        assert!(!report.is_clean());
    }

    #[test]
    fn json_shape() {
        let mut report = ValidationReport::new();
        report.push(Finding::error(
            "E_DANGLING_TARGET",
            Location::Answer { question: "Q".into(), answer: "a".into() },
            "missing",
        ));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["clean"], false);
        assert_eq!(json["findings"][0]["location"], "Q/a");
        assert_eq!(json["findings"][0]["severity"], "error");
    }
}
