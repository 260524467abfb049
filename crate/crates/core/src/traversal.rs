//! One researcher's walk through a tree: answer questions, undo, and fill the
//! fields the reached leaf asks for.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::clock::Clock;
use crate::fields::{self, FieldType, FieldValue};
use crate::report::ValidationReport;
use crate::tree::{self, DecisionTree, LeafNode, Node, Step};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraversalError {
    #[error("tree is not valid")]
    InvalidTree(ValidationReport),
    #[error("the current node is a leaf; there is no question to answer")]
    AtLeaf,
    #[error("already at the first question")]
    AtRoot,
    #[error("{answer:?} is not an answer to {question}")]
    UnknownAnswer { question: String, answer: String },
    #[error("fields can only be set at a leaf")]
    NotAtLeaf,
    #[error("{leaf} does not declare a field {field:?}")]
    UnknownField { leaf: String, field: String },
    #[error("{field}: {message}")]
    FieldSyntax { field: String, message: String },
}

impl TraversalError {
    pub fn code(&self) -> &'static str {
        match self {
            TraversalError::InvalidTree(_) => "E_INVALID_TREE",
            TraversalError::AtLeaf => "E_AT_LEAF",
            TraversalError::AtRoot => "E_AT_ROOT",
            TraversalError::UnknownAnswer { .. } => "E_UNKNOWN_ANSWER",
            TraversalError::NotAtLeaf => "E_NOT_AT_LEAF",
            TraversalError::UnknownField { .. } => "E_UNKNOWN_FIELD",
            TraversalError::FieldSyntax { .. } => "E_FIELD_SYNTAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptOption {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptField {
    pub id: String,
    #[serde(rename = "type")]
    pub field_type: FieldType,
    pub required: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    pub filled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<FieldValue>,
}

/// What to show the researcher at the current node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Prompt {
    Question { node_id: String, text: String, options: Vec<PromptOption> },
    Leaf { node_id: String, outcome: String, prescription: String, fields: Vec<PromptField> },
}

impl Prompt {
    pub fn is_leaf(&self) -> bool {
        matches!(self, Prompt::Leaf { .. })
    }

    pub fn node_id(&self) -> &str {
        match self {
            Prompt::Question { node_id, .. } | Prompt::Leaf { node_id, .. } => node_id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraversalSession {
    tree: Arc<DecisionTree>,
    path: Vec<Step>,
    current: String,
    field_values: BTreeMap<String, FieldValue>,
    created: DateTime<Utc>,
}

impl PartialEq for TraversalSession {
    fn eq(&self, other: &Self) -> bool {
        self.tree.id == other.tree.id
            && self.tree.version == other.tree.version
            && self.path == other.path
            && self.current == other.current
            && self.field_values == other.field_values
            && self.created == other.created
    }
}

impl Eq for TraversalSession {}

impl TraversalSession {
    pub fn start(tree: Arc<DecisionTree>, clock: &dyn Clock) -> Result<Self, TraversalError> {
        let report = tree::validate_tree(&tree);
        if !report.is_empty() {
            return Err(TraversalError::InvalidTree(report));
        }
        let current = tree.root.clone();
        Ok(Self { tree, path: Vec::new(), current, field_values: BTreeMap::new(), created: clock.now() })
    }

    pub fn tree(&self) -> &Arc<DecisionTree> {
        &self.tree
    }

    pub fn path(&self) -> &[Step] {
        &self.path
    }

    pub fn current(&self) -> &str {
        &self.current
    }

    pub fn field_values(&self) -> &BTreeMap<String, FieldValue> {
        &self.field_values
    }

    pub fn created(&self) -> DateTime<Utc> {
        self.created
    }

    fn current_node(&self) -> &Node {
        self.tree.node(&self.current).expect("current always names a node of a validated tree")
    }

    pub fn current_leaf(&self) -> Option<&LeafNode> {
        self.current_node().as_leaf()
    }

    pub fn apply_answer(&mut self, answer_id: &str) -> Result<(), TraversalError> {
        let question = match self.current_node() {
            Node::Leaf(_) => return Err(TraversalError::AtLeaf),
            Node::Question(q) => q,
        };
        let answer = question.answer(answer_id).ok_or_else(|| TraversalError::UnknownAnswer {
            question: question.id.clone(),
            answer: answer_id.to_string(),
        })?;
        let target = answer.target.clone();
        self.path.push(Step::new(&question.id, answer_id));
        self.current = target;
        Ok(())
    }

    /// Steps back to the last answered question. Any field values belonged to
    /// the leaf being left and are dropped.
    pub fn undo(&mut self) -> Result<(), TraversalError> {
        let last = self.path.pop().ok_or(TraversalError::AtRoot)?;
        self.current = last.question;
        self.field_values.clear();
        Ok(())
    }

    pub fn current_prompt(&self) -> Prompt {
        match self.current_node() {
            Node::Question(q) => Prompt::Question {
                node_id: q.id.clone(),
                text: q.prompt.clone(),
                options: q.answers.iter().map(|a| PromptOption { id: a.id.clone(), label: a.label.clone() }).collect(),
            },
            Node::Leaf(l) => Prompt::Leaf {
                node_id: l.id.clone(),
                outcome: l.id.clone(),
                prescription: l.prescription.clone(),
                fields: l
                    .fields
                    .iter()
                    .map(|f| {
                        let value = self.field_values.get(&f.id).cloned();
                        PromptField {
                            id: f.id.clone(),
                            field_type: f.field_type,
                            required: f.required,
                            hint: f.hint.clone(),
                            filled: value.as_ref().is_some_and(|v| !v.is_empty()),
                            value,
                        }
                    })
                    .collect(),
            },
        }
    }

    /// Sets one field after checking it against its declared type. An empty
    /// value clears an optional field and is rejected for a required one.
    pub fn set_field(&mut self, field_id: &str, value: FieldValue) -> Result<(), TraversalError> {
        let leaf = self.current_leaf().ok_or(TraversalError::NotAtLeaf)?;
        let req = leaf.field(field_id).ok_or_else(|| TraversalError::UnknownField {
            leaf: leaf.id.clone(),
            field: field_id.to_string(),
        })?;
        let syntax = |message: String| TraversalError::FieldSyntax { field: field_id.to_string(), message };
        if value.is_empty() {
            if req.required {
                return Err(syntax("required value must not be empty".into()));
            }
            self.field_values.remove(field_id);
            return Ok(());
        }
        let value = fields::normalize(req.field_type, value).map_err(syntax)?;
        fields::check_value(req.field_type, &value).map_err(syntax)?;
        self.field_values.insert(field_id.to_string(), value);
        Ok(())
    }

    /// Applies every entry or none of them; all failures are reported.
    pub fn set_fields<I>(&mut self, entries: I) -> Result<(), Vec<TraversalError>>
    where
        I: IntoIterator<Item = (String, FieldValue)>,
    {
        let mut next = self.clone();
        let errors: Vec<TraversalError> =
            entries.into_iter().filter_map(|(id, value)| next.set_field(&id, value).err()).collect();
        if errors.is_empty() {
            *self = next;
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Required fields of the current leaf that still lack a value. Empty when
    /// not at a leaf.
    pub fn missing_fields(&self) -> Vec<String> {
        self.current_leaf()
            .map(|leaf| {
                leaf.fields
                    .iter()
                    .filter(|f| f.required && self.field_values.get(&f.id).is_none_or(FieldValue::is_empty))
                    .map(|f| f.id.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_complete(&self) -> bool {
        self.current_leaf().is_some() && self.missing_fields().is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{canonical_tree, FixedClock};

    fn session() -> TraversalSession {
        let clock = FixedClock::parse("2024-05-01T09:00:00Z").unwrap();
        TraversalSession::start(Arc::new(canonical_tree()), &clock).unwrap()
    }

    fn walk(answers: &[&str]) -> TraversalSession {
        let mut s = session();
        for a in answers {
            s.apply_answer(a).unwrap();
        }
        s
    }

    #[test]
    fn fresh_session_sits_at_root() {
        let s = session();
        assert_eq!(s.current(), "Q_SHAREABLE");
        assert!(s.path().is_empty());
        assert!(!s.is_complete());
        match s.current_prompt() {
            Prompt::Question { options, .. } => assert_eq!(options.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_tree_is_refused() {
        let mut tree = canonical_tree();
        tree.root = "missing".into();
        let clock = FixedClock::parse("2024-05-01T09:00:00Z").unwrap();
        let err = TraversalSession::start(Arc::new(tree), &clock).unwrap_err();
        assert_eq!(err.code(), "E_INVALID_TREE");
    }

    #[test]
    fn no_no_reaches_not_retrievable() {
        let mut s = session();
        s.apply_answer("no").unwrap();
        assert_eq!(s.current(), "Q_OTHER_ACCESS");
        s.apply_answer("no").unwrap();
        assert_eq!(s.current(), "L_NOT_RETRIEVABLE");
        assert_eq!(s.apply_answer("yes").unwrap_err().code(), "E_AT_LEAF");
    }

    #[test]
    fn unknown_answer_leaves_state_untouched() {
        let mut s = session();
        let before = s.clone();
        assert_eq!(s.apply_answer("maybe").unwrap_err().code(), "E_UNKNOWN_ANSWER");
        assert_eq!(s, before);
    }

    #[test]
    fn undo() {
        let mut s = session();
        assert_eq!(s.undo().unwrap_err().code(), "E_AT_ROOT");
        let before = s.clone();
        s.apply_answer("yes").unwrap();
        s.undo().unwrap();
        assert_eq!(s, before);

        let mut s = walk(&["no", "no"]);
        s.set_field("reason", "patient-level data protected by national regulation".into()).unwrap();
        assert!(s.is_complete());
        s.undo().unwrap();
        assert_eq!(s.current(), "Q_OTHER_ACCESS");
        assert!(s.field_values().is_empty());
    }

    #[test]
    fn prompts_at_method_and_script() {
        let s = walk(&["yes", "yes", "yes"]);
        match s.current_prompt() {
            Prompt::Question { node_id, options, .. } => {
                assert_eq!(node_id, "Q_PREP_METHOD");
                let ids: Vec<_> = options.iter().map(|o| o.id.as_str()).collect();
                assert_eq!(ids, ["script", "tool", "other"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let s = walk(&["yes", "yes", "yes", "script"]);
        let Prompt::Leaf { fields, .. } = s.current_prompt() else { panic!("expected leaf") };
        let required: Vec<_> = fields.iter().filter(|f| f.required).map(|f| f.id.as_str()).collect();
        assert_eq!(required, ["raw_url", "script_ref"]);
        assert!(fields.iter().all(|f| !f.filled));
    }

    #[test]
    fn set_field_checks() {
        let mut s = walk(&["yes", "no", "yes"]);
        let err = s.set_field("preprocessed_url", "not a url".into()).unwrap_err();
        assert_eq!(err.code(), "E_FIELD_SYNTAX");
        assert_eq!(s.set_field("nope", "x".into()).unwrap_err().code(), "E_UNKNOWN_FIELD");
        assert_eq!(s.set_field("preprocessed_url", "  ".into()).unwrap_err().code(), "E_FIELD_SYNTAX");
        s.set_field("preprocessed_url", "https://example.org/d.csv".into()).unwrap();
        assert!(s.is_complete());

        let mut q = session();
        assert_eq!(q.set_field("reason", "x".into()).unwrap_err().code(), "E_NOT_AT_LEAF");
    }

    #[test]
    fn optional_fields_clear_on_empty_and_normalize_keyvalue() {
        let mut s = walk(&["yes", "yes", "yes", "tool", "yes"]);
        s.set_field("tool_config", "lr=0.1; epochs=3".into()).unwrap();
        assert!(matches!(s.field_values()["tool_config"], FieldValue::Map(ref m) if m.len() == 2));
        s.set_field("tool_config", "".into()).unwrap();
        assert!(!s.field_values().contains_key("tool_config"));
    }

    #[test]
    fn completeness_tracks_required_fields() {
        let mut s = walk(&["yes", "yes", "yes", "script"]);
        s.set_field("raw_url", "https://example.org/raw.csv".into()).unwrap();
        assert!(!s.is_complete());
        assert_eq!(s.missing_fields(), ["script_ref"]);
        s.set_field("script_ref", "prep/clean.py".into()).unwrap();
        assert!(s.is_complete());
    }

    #[test]
    fn set_fields_is_all_or_nothing() {
        let mut s = walk(&["no", "yes", "no"]);
        let errs = s
            .set_fields([
                ("accessible_information".to_string(), "aggregates".into()),
                ("bogus".to_string(), "x".into()),
                ("access_procedure".to_string(), "".into()),
            ])
            .unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(s.field_values().is_empty());
    }
}
