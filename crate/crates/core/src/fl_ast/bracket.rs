//! Bracket trees, shared by Lambda DCS programs and S-expressions.

use serde::{Deserialize, Serialize};

use super::ParseError;

/// Whether a bare token is part of the program's structure or a payload
/// (entity id, string, number, date, variable name).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Structural,
    Literal,
}

/// Lambda DCS wrappers whose bare arguments are payloads.
pub const TYPED_WRAPPERS: [&str; 6] = ["string", "number", "date", "time", "var", "lambda"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketTree {
    /// A bare token inside a bracketed node.
    Leaf { token: String, kind: LeafKind },
    /// A bracketed node. `label` is its head token; it is `None` when the
    /// head is itself a bracketed node, as in `( ( lambda s … ) … )`.
    Node {
        label: Option<String>,
        children: Vec<BracketTree>,
    },
}

/// Token spacing used when printing a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketStyle {
    /// `(AND a (JOIN b c))`, the S-expression convention.
    Compact,
    /// `( call f ( string x ) )`, the Lambda DCS convention.
    Spaced,
}

impl BracketTree {
    pub fn node(label: impl Into<String>, children: Vec<BracketTree>) -> BracketTree {
        BracketTree::Node {
            label: Some(label.into()),
            children,
        }
    }

    pub fn leaf(token: impl Into<String>, kind: LeafKind) -> BracketTree {
        BracketTree::Leaf {
            token: token.into(),
            kind,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            BracketTree::Leaf { token, .. } => Some(token),
            BracketTree::Node { label, .. } => label.as_deref(),
        }
    }

    pub fn children(&self) -> &[BracketTree] {
        match self {
            BracketTree::Leaf { .. } => &[],
            BracketTree::Node { children, .. } => children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, BracketTree::Leaf { .. })
    }

    /// Bracketed nodes plus bare leaves; head labels are not counted.
    pub fn node_count(&self) -> usize {
        match self {
            BracketTree::Leaf { .. } => 1,
            BracketTree::Node { children, .. } => 1 + children.iter().map(BracketTree::node_count).sum::<usize>(),
        }
    }

    /// Levels counting bare leaves, so `(A b)` has depth 2.
    pub fn depth(&self) -> usize {
        match self {
            BracketTree::Leaf { .. } => 1,
            BracketTree::Node { children, .. } => 1 + children.iter().map(BracketTree::depth).max().unwrap_or(0),
        }
    }

    /// All bare leaves, left to right.
    pub fn leaves(&self) -> Vec<(&str, LeafKind)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a str, LeafKind)>) {
        match self {
            BracketTree::Leaf { token, kind } => out.push((token, *kind)),
            BracketTree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Applies `f` to every bare leaf, keeping the shape.
    pub fn map_leaves(&self, f: &mut impl FnMut(&str, LeafKind) -> String) -> BracketTree {
        match self {
            BracketTree::Leaf { token, kind } => BracketTree::Leaf {
                token: f(token, *kind),
                kind: *kind,
            },
            BracketTree::Node { label, children } => BracketTree::Node {
                label: label.clone(),
                children: children.iter().map(|c| c.map_leaves(f)).collect(),
            },
        }
    }

    pub fn serialize(&self, style: BracketStyle) -> String {
        serialize_bracket(self, style)
    }
}

/// Classifies a bare token given the label of its enclosing node.
pub fn classify_leaf(token: &str, parent_label: Option<&str>) -> LeafKind {
    if parent_label.is_some_and(|l| TYPED_WRAPPERS.contains(&l)) || is_payload_token(token) {
        LeafKind::Literal
    } else {
        LeafKind::Structural
    }
}

/// Entity ids (`m.…`, `g.…`, `en.…`), typed literals, and numbers.
pub fn is_payload_token(token: &str) -> bool {
    let is_id = |prefix: &str| {
        token.strip_prefix(prefix).is_some_and(|rest| {
            !rest.is_empty() && rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        })
    };
    if is_id("m.") || is_id("g.") || is_id("en.") {
        return true;
    }
    token.contains("^^") || token.starts_with('"') || token.parse::<f64>().is_ok()
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                toks.push(Tok::Atom(&text[s..i]));
            }
            if c == '(' {
                toks.push(Tok::Open);
            } else if c == ')' {
                toks.push(Tok::Close);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push(Tok::Atom(&text[s..]));
    }
    toks
}

/// Parses a single bracket expression. A lone bare token is accepted as a
/// leaf.
pub fn parse_bracket(text: &str) -> Result<BracketTree, ParseError> {
    let toks = tokenize(text);
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut pos = 0;
    let tree = match toks[0] {
        Tok::Atom(a) if toks.len() == 1 => {
            return Ok(BracketTree::leaf(a, classify_leaf(a, None)));
        }
        Tok::Open => parse_node(&toks, &mut pos)?,
        _ => return Err(ParseError::UnbalancedBrackets),
    };
    if pos != toks.len() {
        return Err(ParseError::UnbalancedBrackets);
    }
    Ok(tree)
}

fn parse_node(toks: &[Tok<'_>], pos: &mut usize) -> Result<BracketTree, ParseError> {
    debug_assert_eq!(toks[*pos], Tok::Open);
    *pos += 1;
    let mut label = None;
    let mut children = Vec::new();
    let mut first = true;
    loop {
        match toks.get(*pos) {
            None => return Err(ParseError::UnbalancedBrackets),
            Some(Tok::Close) => {
                *pos += 1;
                return Ok(BracketTree::Node { label, children });
            }
            Some(Tok::Open) => children.push(parse_node(toks, pos)?),
            Some(Tok::Atom(a)) => {
                if first {
                    label = Some(a.to_string());
                } else {
                    let kind = classify_leaf(a, label.as_deref());
                    children.push(BracketTree::leaf(*a, kind));
                }
                *pos += 1;
            }
        }
        first = false;
    }
}

pub fn serialize_bracket(tree: &BracketTree, style: BracketStyle) -> String {
    let mut out = String::new();
    write_tree(tree, style, &mut out);
    out
}

fn write_tree(tree: &BracketTree, style: BracketStyle, out: &mut String) {
    match tree {
        BracketTree::Leaf { token, .. } => out.push_str(token),
        BracketTree::Node { label, children } => {
            let mut parts: Vec<String> = Vec::with_capacity(children.len() + 1);
            if let Some(l) = label {
                parts.push(l.clone());
            }
            for c in children {
                let mut s = String::new();
                write_tree(c, style, &mut s);
                parts.push(s);
            }
            match style {
                BracketStyle::Compact => {
                    out.push('(');
                    out.push_str(&parts.join(" "));
                    out.push(')');
                }
                BracketStyle::Spaced => {
                    out.push_str("( ");
                    for p in &parts {
                        out.push_str(p);
                        out.push(' ');
                    }
                    out.push(')');
                }
            }
        }
    }
}
