//! Decision tree model: question nodes branch on answers, leaf nodes prescribe
//! the metadata a researcher has to provide.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::FieldRequirement;
use crate::report::{Finding, Location, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub id: String,
    pub label: String,
    pub target: String,
}

impl Answer {
    pub fn new(id: &str, label: &str, target: &str) -> Self {
        Self { id: id.to_string(), label: label.to_string(), target: target.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionNode {
    pub id: String,
    pub prompt: String,
    pub answers: Vec<Answer>,
}

impl QuestionNode {
    pub fn answer(&self, id: &str) -> Option<&Answer> {
        self.answers.iter().find(|a| a.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafNode {
    /// Doubles as the outcome code recorded in manifests.
    pub id: String,
    pub prescription: String,
    pub fields: Vec<FieldRequirement>,
}

impl LeafNode {
    pub fn field(&self, id: &str) -> Option<&FieldRequirement> {
        self.fields.iter().find(|f| f.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Question(QuestionNode),
    Leaf(LeafNode),
}

impl Node {
    pub fn id(&self) -> &str {
        match self {
            Node::Question(q) => &q.id,
            Node::Leaf(l) => &l.id,
        }
    }

    pub fn as_question(&self) -> Option<&QuestionNode> {
        match self {
            Node::Question(q) => Some(q),
            Node::Leaf(_) => None,
        }
    }

    pub fn as_leaf(&self) -> Option<&LeafNode> {
        match self {
            Node::Leaf(l) => Some(l),
            Node::Question(_) => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf(_))
    }
}

/// A decision tree. Nodes are kept in declaration order; equality ignores
/// that order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub id: String,
    pub version: u32,
    pub root: String,
    pub nodes: Vec<Node>,
}

impl PartialEq for DecisionTree {
    fn eq(&self, other: &Self) -> bool {
        fn sorted(nodes: &[Node]) -> Vec<&Node> {
            let mut v: Vec<&Node> = nodes.iter().collect();
            v.sort_by(|a, b| a.id().cmp(b.id()));
            v
        }
        self.id == other.id
            && self.version == other.version
            && self.root == other.root
            && sorted(&self.nodes) == sorted(&other.nodes)
    }
}

impl Eq for DecisionTree {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("node {0:?} not found")]
    NodeNotFound(String),
    #[error("invalid tree: {}", summarize(.0))]
    InvalidTree(ValidationReport),
}

impl TreeError {
    pub fn code(&self) -> &'static str {
        match self {
            TreeError::NodeNotFound(_) => "E_NODE_NOT_FOUND",
            TreeError::InvalidTree(_) => "E_INVALID_TREE",
        }
    }
}

fn summarize(report: &ValidationReport) -> String {
    report.findings.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One (question, answer) pair of a decision path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub question: String,
    pub answer: String,
}

impl Step {
    pub fn new(question: &str, answer: &str) -> Self {
        Self { question: question.to_string(), answer: answer.to_string() }
    }
}

/// A root-to-leaf route.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub steps: Vec<Step>,
    pub leaf: String,
}

impl Path {
    pub fn answers(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.answer.as_str())
    }
}

impl DecisionTree {
    /// Looks a node up by id.
    pub fn node(&self, id: &str) -> Result<&Node, TreeError> {
        self.nodes
            .iter()
            .find(|n| n.id() == id)
            .ok_or_else(|| TreeError::NodeNotFound(id.to_string()))
    }

    pub fn root_node(&self) -> Result<&Node, TreeError> {
        self.node(&self.root)
    }

    pub fn questions(&self) -> impl Iterator<Item = &QuestionNode> {
        self.nodes.iter().filter_map(Node::as_question)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &LeafNode> {
        self.nodes.iter().filter_map(Node::as_leaf)
    }

    pub fn edge_count(&self) -> usize {
        self.questions().map(|q| q.answers.len()).sum()
    }

    /// Follows `steps` from the root. Each step must name the question it is
    /// taken at and an answer offered there.
    pub fn follow(&self, steps: &[Step]) -> Result<&Node, String> {
        let mut current = self.root_node().map_err(|e| e.to_string())?;
        for (i, step) in steps.iter().enumerate() {
            let question = match current {
                Node::Question(q) => q,
                Node::Leaf(l) => {
                    return Err(format!("step {i} continues past leaf {}", l.id));
                }
            };
            if question.id != step.question {
                return Err(format!(
                    "step {i} names question {} but the walk is at {}",
                    step.question, question.id
                ));
            }
            let answer = question.answer(&step.answer).ok_or_else(|| {
                format!("step {i}: question {} has no answer {:?}", question.id, step.answer)
            })?;
            current = self.node(&answer.target).map_err(|e| e.to_string())?;
        }
        Ok(current)
    }

    /// Nodes in depth-first preorder from the root, following answer order.
    /// Only meaningful for trees that validate cleanly.
    pub fn preorder(&self) -> Vec<&Node> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut seen = HashSet::new();
        let mut stack: Vec<&str> = vec![&self.root];
        while let Some(id) = stack.pop() {
            let Ok(node) = self.node(id) else { continue };
            if !seen.insert(node.id()) {
                continue;
            }
            out.push(node);
            if let Node::Question(q) = node {
                stack.extend(q.answers.iter().rev().map(|a| a.target.as_str()));
            }
        }
        out
    }
}

/// What a structural finding points at, by declaration index. The DSL uses
/// this to attach source lines to findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Tree,
    Root,
    Node(usize),
    Answer(usize, usize),
    Field(usize, usize),
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Structural validation; findings carry the declaration they refer to.
pub fn validate_tree_anchored(tree: &DecisionTree) -> Vec<(Finding, Anchor)> {
    let mut out = Vec::new();
    let node_loc = |i: usize| Location::Node(tree.nodes[i].id().to_string());

    if tree.version == 0 {
        out.push((
            Finding::error("E_INVALID_VERSION", Location::Tree, "tree version must be positive"),
            Anchor::Tree,
        ));
    }

    let has_control = |s: &str| s.chars().any(char::is_control);
    if has_control(&tree.id) {
        out.push((
            Finding::error("E_INVALID_TEXT", Location::Tree, "tree id contains control characters"),
            Anchor::Tree,
        ));
    }

    // First declaration wins for id resolution; later ones are duplicates.
    let mut index_of = std::collections::HashMap::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        if !is_identifier(node.id()) {
            out.push((
                Finding::error("E_INVALID_ID", node_loc(i), format!("{:?} is not a valid identifier", node.id())),
                Anchor::Node(i),
            ));
        }
        if index_of.contains_key(node.id()) {
            out.push((
                Finding::error("E_DUPLICATE_ID", node_loc(i), format!("node {} declared more than once", node.id())),
                Anchor::Node(i),
            ));
        } else {
            index_of.insert(node.id(), i);
        }
    }

    for (i, node) in tree.nodes.iter().enumerate() {
        let texts: Vec<&str> = match node {
            Node::Question(q) => std::iter::once(q.prompt.as_str())
                .chain(q.answers.iter().map(|a| a.label.as_str()))
                .collect(),
            Node::Leaf(l) => std::iter::once(l.prescription.as_str())
                .chain(l.fields.iter().filter_map(|f| f.hint.as_deref()))
                .collect(),
        };
        if texts.into_iter().any(has_control) {
            out.push((
                Finding::error("E_INVALID_TEXT", node_loc(i), format!("text of {} contains control characters", node.id())),
                Anchor::Node(i),
            ));
        }
        match node {
            Node::Question(q) => {
                if q.answers.len() < 2 {
                    out.push((
                        Finding::error(
                            "E_TOO_FEW_ANSWERS",
                            node_loc(i),
                            format!("question {} offers {} answer(s), at least 2 required", q.id, q.answers.len()),
                        ),
                        Anchor::Node(i),
                    ));
                }
                let mut seen = HashSet::new();
                for (j, a) in q.answers.iter().enumerate() {
                    let loc = Location::Answer { question: q.id.clone(), answer: a.id.clone() };
                    if !is_identifier(&a.id) {
                        out.push((
                            Finding::error("E_INVALID_ID", loc.clone(), format!("{:?} is not a valid identifier", a.id)),
                            Anchor::Answer(i, j),
                        ));
                    }
                    if !seen.insert(a.id.as_str()) {
                        out.push((
                            Finding::error("E_DUPLICATE_ID", loc.clone(), format!("answer {} repeated in {}", a.id, q.id)),
                            Anchor::Answer(i, j),
                        ));
                    }
                    if !index_of.contains_key(a.target.as_str()) {
                        out.push((
                            Finding::error("E_DANGLING_TARGET", loc, format!("answer {} targets missing node {}", a.id, a.target)),
                            Anchor::Answer(i, j),
                        ));
                    }
                }
            }
            Node::Leaf(l) => {
                let mut seen = HashSet::new();
                for (j, f) in l.fields.iter().enumerate() {
                    let loc = Location::Field { leaf: l.id.clone(), field: f.id.clone() };
                    if !is_identifier(&f.id) {
                        out.push((
                            Finding::error("E_INVALID_ID", loc.clone(), format!("{:?} is not a valid identifier", f.id)),
                            Anchor::Field(i, j),
                        ));
                    }
                    if !seen.insert(f.id.as_str()) {
                        out.push((
                            Finding::error("E_DUPLICATE_ID", loc, format!("field {} repeated in {}", f.id, l.id)),
                            Anchor::Field(i, j),
                        ));
                    }
                }
            }
        }
    }

    let Some(&root) = index_of.get(tree.root.as_str()) else {
        out.push((
            Finding::error("E_NO_ROOT", Location::Tree, format!("root {} is not declared", tree.root)),
            Anchor::Root,
        ));
        return out;
    };
    if tree.nodes[root].is_leaf() {
        out.push((
            Finding::error("E_ROOT_NOT_QUESTION", node_loc(root), "the root must be a question"),
            Anchor::Root,
        ));
    }

    // Depth-first walk; any edge into an already-entered node breaks the tree
    // shape, either as a cycle (target on the stack) or a shared subtree.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut marks = vec![Mark::New; tree.nodes.len()];
    // (node index, next answer index)
    let mut stack = vec![(root, 0usize)];
    marks[root] = Mark::Open;
    while let Some(&mut (i, ref mut next)) = stack.last_mut() {
        let answers = match &tree.nodes[i] {
            Node::Question(q) => q.answers.as_slice(),
            Node::Leaf(_) => &[],
        };
        if *next >= answers.len() {
            marks[i] = Mark::Done;
            stack.pop();
            continue;
        }
        let j = *next;
        *next += 1;
        let answer = &answers[j];
        let Some(&target) = index_of.get(answer.target.as_str()) else { continue };
        let loc = Location::Answer { question: tree.nodes[i].id().to_string(), answer: answer.id.clone() };
        match marks[target] {
            Mark::New => {
                marks[target] = Mark::Open;
                stack.push((target, 0));
            }
            Mark::Open => out.push((
                Finding::error("E_CYCLE", loc, format!("answer {} leads back to ancestor {}", answer.id, answer.target)),
                Anchor::Answer(i, j),
            )),
            Mark::Done => out.push((
                Finding::error("E_CYCLE", loc, format!("node {} is reached from more than one parent", answer.target)),
                Anchor::Answer(i, j),
            )),
        }
    }

    for (id, &i) in &index_of {
        if marks[i] == Mark::New {
            out.push((
                Finding::error("E_UNREACHABLE", Location::Node(id.to_string()), format!("node {id} is not reachable from the root")),
                Anchor::Node(i),
            ));
        }
    }
    // HashMap iteration order is arbitrary; keep reports deterministic.
    out.sort_by_key(|(_, anchor)| anchor_order(*anchor));
    out
}

fn anchor_order(anchor: Anchor) -> (usize, usize, usize) {
    match anchor {
        Anchor::Tree => (0, 0, 0),
        Anchor::Root => (1, 0, 0),
        Anchor::Node(i) => (2 + i, 0, 0),
        Anchor::Answer(i, j) | Anchor::Field(i, j) => (2 + i, 1 + j, 0),
    }
}

/// Checks every structural invariant. Violations are findings, not failures;
/// the report is empty iff the tree is well formed.
pub fn validate_tree(tree: &DecisionTree) -> ValidationReport {
    ValidationReport { findings: validate_tree_anchored(tree).into_iter().map(|(f, _)| f).collect() }
}

pub(crate) fn ensure_valid(tree: &DecisionTree) -> Result<(), TreeError> {
    let report = validate_tree(tree);
    if report.is_empty() {
        Ok(())
    } else {
        Err(TreeError::InvalidTree(report))
    }
}

/// Every root-to-leaf path in depth-first answer-declaration order.
pub fn enumerate_paths(tree: &DecisionTree) -> Result<Vec<Path>, TreeError> {
    ensure_valid(tree)?;
    let mut paths = Vec::new();
    let mut steps = Vec::new();
    walk(tree, &tree.root, &mut steps, &mut paths);
    Ok(paths)
}

fn walk(tree: &DecisionTree, id: &str, steps: &mut Vec<Step>, paths: &mut Vec<Path>) {
    match tree.node(id).expect("validated tree") {
        Node::Leaf(l) => paths.push(Path { steps: steps.clone(), leaf: l.id.clone() }),
        Node::Question(q) => {
            for a in &q.answers {
                steps.push(Step::new(&q.id, &a.id));
                walk(tree, &a.target, steps, paths);
                steps.pop();
            }
        }
    }
}
