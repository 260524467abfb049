//! Text format for decision trees (`.tree` files).
//!
//! ```text
//! # comment
//! tree "data-retrievability" version 1
//! root Q_SHAREABLE
//!
//! question Q_SHAREABLE "Can the dataset be shared?" {
//!   answer yes "Yes" -> Q_RAW_PUBLIC
//!   answer no -> L_NOT_RETRIEVABLE
//! }
//!
//! leaf L_NOT_RETRIEVABLE "State why." {
//!   require reason: text "the governing regulation"
//!   optional note: text
//! }
//! ```
//!
//! Whitespace and newlines between tokens are insignificant. Strings are
//! double-quoted with `\"` and `\\` escapes. Field types are `text`, `url`,
//! `path`, `version` and `keyvalue`.

use std::fmt;
use std::fmt::Write as _;

use crate::fields::{FieldRequirement, FieldType};
use crate::tree::{self, Anchor, Answer, DecisionTree, LeafNode, Node, QuestionNode, TreeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub code: &'static str,
    pub message: String,
}

impl ParseError {
    fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        Self { line: pos.line, column: pos.column, code: "E_SYNTAX", message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {} {}", self.line, self.column, self.code, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Int(String),
    LBrace,
    RBrace,
    Arrow,
    Colon,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(_) => "string".into(),
            Tok::Int(i) => format!("number {i}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = source.chars().peekable();
    let mut pos = Pos { line: 1, column: 1 };

    fn bump(chars: &mut std::iter::Peekable<std::str::Chars<'_>>, pos: &mut Pos) -> Option<char> {
        let c = chars.next()?;
        if c == '\n' {
            pos.line += 1;
            pos.column = 1;
        } else {
            pos.column += 1;
        }
        Some(c)
    }

    while let Some(&c) = chars.peek() {
        let start = pos;
        match c {
            c if c.is_whitespace() => {
                bump(&mut chars, &mut pos);
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars, &mut pos);
                }
            }
            '{' | '}' | ':' => {
                bump(&mut chars, &mut pos);
                out.push((
                    match c {
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        _ => Tok::Colon,
                    },
                    start,
                ));
            }
            '-' => {
                bump(&mut chars, &mut pos);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars, &mut pos);
                    out.push((Tok::Arrow, start));
                } else {
                    return Err(ParseError::syntax(start, "expected `->`"));
                }
            }
            '"' => {
                bump(&mut chars, &mut pos);
                let mut text = String::new();
                loop {
                    let at = pos;
                    match bump(&mut chars, &mut pos) {
                        None => return Err(ParseError::syntax(start, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match bump(&mut chars, &mut pos) {
                            Some(e @ ('"' | '\\')) => text.push(e),
                            _ => return Err(ParseError::syntax(at, "invalid escape, only \\\" and \\\\ are allowed")),
                        },
                        Some(c) if c.is_control() => {
                            return Err(ParseError::syntax(at, "control character inside string"));
                        }
                        Some(c) => text.push(c),
                    }
                }
                out.push((Tok::Str(text), start));
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&d) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    digits.push(d);
                    bump(&mut chars, &mut pos);
                }
                out.push((Tok::Int(digits), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&d) = chars.peek() {
                    if !(d.is_ascii_alphanumeric() || d == '_') {
                        break;
                    }
                    word.push(d);
                    bump(&mut chars, &mut pos);
                }
                out.push((Tok::Word(word), start));
            }
            other => return Err(ParseError::syntax(start, format!("unexpected character {other:?}"))),
        }
    }
    out.push((Tok::Eof, pos));
    Ok(out)
}

/// Source positions of every declaration, parallel to `DecisionTree::nodes`.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub header: Pos,
    pub root: Pos,
    /// Per node: its declaration, then one entry per answer or field.
    pub nodes: Vec<(Pos, Vec<Pos>)>,
}

impl SourceMap {
    fn locate(&self, anchor: Anchor) -> Pos {
        match anchor {
            Anchor::Tree => self.header,
            Anchor::Root => self.root,
            Anchor::Node(i) => self.nodes[i].0,
            Anchor::Answer(i, j) | Anchor::Field(i, j) => self.nodes[i].1[j],
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, Pos) {
        &self.toks[self.at]
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let (tok, pos) = self.peek();
        ParseError::syntax(*pos, format!("expected {wanted}, found {}", tok.describe()))
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, ParseError> {
        match self.peek() {
            (Tok::Word(w), pos) if w == kw => {
                let pos = *pos;
                self.next();
                Ok(pos)
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            (Tok::Word(_), _) => match self.next().0 {
                Tok::Word(w) => Ok(w),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.opt_string().ok_or_else(|| self.unexpected("a string"))
    }

    fn opt_string(&mut self) -> Option<String> {
        match self.peek() {
            (Tok::Str(_), _) => match self.next().0 {
                Tok::Str(s) => Some(s),
                _ => unreachable!(),
            },
            _ => None,
        }
    }

    fn punct(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek().0 == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn tree(&mut self) -> Result<(DecisionTree, SourceMap), ParseError> {
        let mut map = SourceMap { header: self.keyword("tree")?, ..Default::default() };
        let id = self.string()?;
        self.keyword("version")?;
        let version = match self.peek() {
            (Tok::Int(digits), pos) => {
                let pos = *pos;
                let v = digits
                    .parse::<u32>()
                    .map_err(|_| ParseError::syntax(pos, format!("version {digits} out of range")))?;
                self.next();
                v
            }
            _ => return Err(self.unexpected("a version number")),
        };
        map.root = self.keyword("root")?;
        let root = self.ident()?;

        let mut nodes = Vec::new();
        loop {
            match self.peek() {
                (Tok::Word(w), _) if w == "question" => {
                    let (node, pos) = self.question()?;
                    nodes.push(node);
                    map.nodes.push(pos);
                }
                (Tok::Word(w), _) if w == "leaf" => {
                    let (node, pos) = self.leaf()?;
                    nodes.push(node);
                    map.nodes.push(pos);
                }
                (Tok::Eof, _) if !nodes.is_empty() => break,
                _ => return Err(self.unexpected("`question` or `leaf`")),
            }
        }
        Ok((DecisionTree { id, version, root, nodes }, map))
    }

    fn question(&mut self) -> Result<(Node, (Pos, Vec<Pos>)), ParseError> {
        let decl = self.keyword("question")?;
        let id = self.ident()?;
        let prompt = self.string()?;
        self.punct(Tok::LBrace)?;
        let mut answers = Vec::new();
        let mut lines = Vec::new();
        while self.peek().0 != Tok::RBrace {
            lines.push(self.keyword("answer").map_err(|_| self.unexpected("`answer` or `}`"))?);
            let aid = self.ident()?;
            let label = self.opt_string().unwrap_or_else(|| aid.clone());
            self.punct(Tok::Arrow)?;
            let target = self.ident()?;
            answers.push(Answer { id: aid, label, target });
        }
        self.next();
        Ok((Node::Question(QuestionNode { id, prompt, answers }), (decl, lines)))
    }

    fn leaf(&mut self) -> Result<(Node, (Pos, Vec<Pos>)), ParseError> {
        let decl = self.keyword("leaf")?;
        let id = self.ident()?;
        let prescription = self.string()?;
        self.punct(Tok::LBrace)?;
        let mut fields = Vec::new();
        let mut lines = Vec::new();
        loop {
            let required = match self.peek() {
                (Tok::RBrace, _) => break,
                (Tok::Word(w), _) if w == "require" => true,
                (Tok::Word(w), _) if w == "optional" => false,
                _ => return Err(self.unexpected("`require`, `optional` or `}`")),
            };
            lines.push(self.next().1);
            let fid = self.ident()?;
            self.punct(Tok::Colon)?;
            let type_pos = self.peek().1;
            let word = self.ident()?;
            let field_type = word.parse::<FieldType>().map_err(|_| {
                ParseError::syntax(type_pos, format!("unknown field type `{word}`"))
            })?;
            let hint = self.opt_string();
            fields.push(FieldRequirement { id: fid, field_type, required, hint });
        }
        self.next();
        Ok((Node::Leaf(LeafNode { id, prescription, fields }), (decl, lines)))
    }
}

/// Parses the grammar only, without structural checks.
pub fn parse_unchecked(source: &str) -> Result<(DecisionTree, SourceMap), ParseError> {
    let toks = lex(source)?;
    Parser { toks, at: 0 }.tree()
}

/// Parses and runs every structural check. The outer error is a syntax error;
/// the returned list holds structural violations, in source order.
pub fn parse_and_check(source: &str) -> Result<(DecisionTree, Vec<ParseError>), ParseError> {
    let (tree, map) = parse_unchecked(source)?;
    let mut problems: Vec<ParseError> = tree::validate_tree_anchored(&tree)
        .into_iter()
        .map(|(finding, anchor)| {
            let pos = map.locate(anchor);
            ParseError { line: pos.line, column: pos.column, code: finding.code, message: finding.message }
        })
        .collect();
    problems.sort_by_key(|p| (p.line, p.column));
    Ok((tree, problems))
}

/// Parses a `.tree` source into a validated tree.
pub fn parse_tree(source: &str) -> Result<DecisionTree, ParseError> {
    let (tree, problems) = parse_and_check(source)?;
    match problems.into_iter().next() {
        Some(first) => Err(first),
        None => Ok(tree),
    }
}

fn quote(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

/// Canonical text form: header, root, then nodes in depth-first preorder.
pub fn serialize_tree(tree: &DecisionTree) -> Result<String, TreeError> {
    tree::ensure_valid(tree)?;
    let mut out = String::new();
    out.push_str("tree ");
    quote(&mut out, &tree.id);
    let _ = writeln!(out, " version {}", tree.version);
    let _ = writeln!(out, "root {}", tree.root);
    for node in tree.preorder() {
        out.push('\n');
        match node {
            Node::Question(q) => {
                let _ = write!(out, "question {} ", q.id);
                quote(&mut out, &q.prompt);
                out.push_str(" {\n");
                for a in &q.answers {
                    let _ = write!(out, "  answer {}", a.id);
                    if a.label != a.id {
                        out.push(' ');
                        quote(&mut out, &a.label);
                    }
                    let _ = writeln!(out, " -> {}", a.target);
                }
                out.push_str("}\n");
            }
            Node::Leaf(l) => {
                let _ = write!(out, "leaf {} ", l.id);
                quote(&mut out, &l.prescription);
                if l.fields.is_empty() {
                    out.push_str(" {}\n");
                    continue;
                }
                out.push_str(" {\n");
                for f in &l.fields {
                    let kw = if f.required { "require" } else { "optional" };
                    let _ = write!(out, "  {kw} {}: {}", f.id, f.field_type);
                    if let Some(hint) = &f.hint {
                        out.push(' ');
                        quote(&mut out, hint);
                    }
                    out.push('\n');
                }
                out.push_str("}\n");
            }
        }
    }
    Ok(out)
}
