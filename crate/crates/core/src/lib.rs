//! Data retrievability decision tree and the tooling around it.
//!
//! The crate models a questionnaire-style decision tree whose leaves prescribe
//! which metadata must accompany a dataset so that other researchers can
//! retrieve it. Around the model sit a text format for trees (`dsl`), the
//! interactive walk (`traversal`), the manifest produced at a leaf
//! (`manifest`), deep checks over manifests (`validators`) and a Graphviz
//! export (`render`).

pub mod clock;
pub mod dsl;
pub mod fields;
pub mod manifest;
pub mod render;
pub mod report;
pub mod traversal;
pub mod tree;
pub mod validators;

mod canonical;

pub use canonical::canonical_tree;
pub use clock::{Clock, FixedClock, SystemClock};
pub use dsl::{parse_tree, serialize_tree, ParseError};
pub use fields::{FieldRequirement, FieldType, FieldValue};
pub use manifest::{build_manifest, parse_manifest, serialize_manifest, validate_manifest, RetrievabilityManifest};
pub use render::to_dot;
pub use report::{Finding, Location, Severity, ValidationReport};
pub use traversal::{Prompt, TraversalError, TraversalSession};
pub use tree::{enumerate_paths, validate_tree, DecisionTree, Node, Path, Step, TreeError};
