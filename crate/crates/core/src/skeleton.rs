//! Structure-only skeletons of logical forms and entity-masked questions.
//!
//! A skeleton is the retrieval key for structural similarity:
//!
//! * KoPL: the function names in post-order, joined with `.`;
//! * Lambda DCS: the bracket tree with every payload leaf removed, typed
//!   wrappers (`string`, `number`, `var`, …) kept as bare markers;
//! * SPARQL: the companion S-expression with relation/class tokens renamed
//!   `[V0]`, `[V1]`, … and entity/literal tokens renamed `[E0]`, `[E1]`, …
//!   in first-occurrence order.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl_ast::bracket::{BracketStyle, BracketTree, LeafKind, TYPED_WRAPPERS};
use crate::fl_ast::sparql::strip_iri;
use crate::fl_ast::{FormalProgram, KoplProgram, Language, ProgramBody};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("SPARQL program has no companion S-expression")]
    MissingSexpr,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Skeleton {
    pub language: Language,
    pub tokens: Vec<String>,
    pub text: String,
    pub labels: BTreeSet<String>,
}

impl Skeleton {
    pub fn from_tokens(language: Language, tokens: Vec<String>) -> Skeleton {
        let text = render(language, &tokens);
        let labels = tokens.iter().filter(|t| *t != "(" && *t != ")").cloned().collect();
        Skeleton {
            language,
            tokens,
            text,
            labels,
        }
    }
}

fn render(language: Language, tokens: &[String]) -> String {
    match language {
        Language::Kopl => tokens.join("."),
        Language::LambdaDcs => tokens.join(" "),
        Language::Sparql => {
            let mut out = String::new();
            for (i, t) in tokens.iter().enumerate() {
                let glue = i == 0 || tokens[i - 1] == "(" || t == ")";
                if !glue {
                    out.push(' ');
                }
                out.push_str(t);
            }
            out
        }
    }
}

/// Splits compact bracket text into `(`, `)` and atom tokens.
fn bracket_tokens(text: &str) -> Vec<String> {
    text.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

pub fn skeleton_of(program: &FormalProgram) -> Result<Skeleton, SkeletonError> {
    match &program.body {
        ProgramBody::Kopl(p) => Ok(kopl_skeleton(p)),
        ProgramBody::LambdaDcs(tree) => {
            let stripped = strip_payloads(tree);
            let text = stripped.serialize(BracketStyle::Spaced);
            Ok(Skeleton::from_tokens(
                Language::LambdaDcs,
                text.split_whitespace().map(str::to_string).collect(),
            ))
        }
        ProgramBody::Sparql(q) => {
            let sexpr = q.companion_sexpr.as_ref().ok_or(SkeletonError::MissingSexpr)?;
            Ok(sexpr_skeleton(sexpr))
        }
    }
}

pub fn kopl_skeleton(program: &KoplProgram) -> Skeleton {
    Skeleton::from_tokens(
        Language::Kopl,
        program.functions().iter().map(|f| f.op.name().to_string()).collect(),
    )
}

fn strip_payloads(tree: &BracketTree) -> BracketTree {
    match tree {
        BracketTree::Leaf { .. } => tree.clone(),
        BracketTree::Node { label, children } => BracketTree::Node {
            label: label.clone(),
            children: children
                .iter()
                .filter(|c| {
                    !matches!(
                        c,
                        BracketTree::Leaf {
                            kind: LeafKind::Literal,
                            ..
                        }
                    )
                })
                .map(strip_payloads)
                .collect(),
        },
    }
}

/// Placeholder skeleton of an S-expression.
pub fn sexpr_skeleton(sexpr: &BracketTree) -> Skeleton {
    let mut relations: HashMap<String, usize> = HashMap::new();
    let mut entities: HashMap<String, usize> = HashMap::new();
    let renamed = sexpr.map_leaves(&mut |token, kind| {
        let (table, prefix) = match kind {
            LeafKind::Literal => (&mut entities, 'E'),
            LeafKind::Structural => (&mut relations, 'V'),
        };
        let next = table.len();
        let idx = *table.entry(token.to_string()).or_insert(next);
        format!("[{prefix}{idx}]")
    });
    let text = renamed.serialize(BracketStyle::Compact);
    Skeleton::from_tokens(Language::Sparql, bracket_tokens(&text))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlqSkeleton {
    pub text: String,
    /// Placeholder to original surface span, in placeholder order.
    pub placeholder_map: Vec<(String, String)>,
    /// Requested spans that never matched.
    pub skipped: Vec<String>,
}

impl NlqSkeleton {
    /// Substitutes the original spans back.
    pub fn unmask(&self) -> String {
        let mut out = self.text.clone();
        for (ph, surface) in &self.placeholder_map {
            out = out.replace(ph.as_str(), surface);
        }
        out
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b >= 0x80
}

/// Replaces entity (and known relation) mentions with `[E0]`, `[E1]`, ….
/// Matching is ASCII case-insensitive and respects word boundaries;
/// overlapping matches resolve leftmost-longest. Repeated surfaces share a
/// placeholder.
pub fn mask_nlq<S: AsRef<str>>(question: &str, spans: &[S]) -> NlqSkeleton {
    let bytes = question.as_bytes();
    let mut matches: Vec<(usize, usize)> = Vec::new();
    let mut wanted: Vec<&str> = Vec::new();
    for s in spans {
        let s = s.as_ref().trim();
        if !s.is_empty() && !wanted.contains(&s) {
            wanted.push(s);
        }
    }
    let mut hit = vec![false; wanted.len()];
    for (si, span) in wanted.iter().enumerate() {
        let sb = span.as_bytes();
        if sb.len() > bytes.len() {
            continue;
        }
        for start in 0..=bytes.len() - sb.len() {
            let end = start + sb.len();
            if !bytes[start..end].eq_ignore_ascii_case(sb) {
                continue;
            }
            if is_word_byte(sb[0]) && start > 0 && is_word_byte(bytes[start - 1]) {
                continue;
            }
            if is_word_byte(sb[sb.len() - 1]) && end < bytes.len() && is_word_byte(bytes[end]) {
                continue;
            }
            matches.push((start, end));
            hit[si] = true;
        }
    }
    matches.sort_by(|a, b| a.0.cmp(&b.0).then((b.1 - b.0).cmp(&(a.1 - a.0))));

    let mut text = String::with_capacity(question.len());
    let mut placeholder_map: Vec<(String, String)> = Vec::new();
    let mut cursor = 0;
    for (start, end) in matches {
        if start < cursor {
            continue;
        }
        let surface = &question[start..end];
        let ph = match placeholder_map.iter().find(|(_, s)| s == surface) {
            Some((ph, _)) => ph.clone(),
            None => {
                let ph = format!("[E{}]", placeholder_map.len());
                placeholder_map.push((ph.clone(), surface.to_string()));
                ph
            }
        };
        text.push_str(&question[cursor..start]);
        text.push_str(&ph);
        cursor = end;
    }
    text.push_str(&question[cursor..]);
    let skipped = wanted
        .iter()
        .zip(&hit)
        .filter(|(_, h)| !**h)
        .map(|(s, _)| s.to_string())
        .collect();
    NlqSkeleton {
        text,
        placeholder_map,
        skipped,
    }
}

const KOPL_NON_MENTIONS: [&str; 10] = [
    "=", "!=", "<", ">", "forward", "backward", "greater", "less", "largest", "smallest",
];

/// Surface strings of a logical form that may be mentioned in its question:
/// KoPL text arguments (minus operators and directions), SPARQL `VALUES`
/// entities and S-expression literals, Lambda DCS entity names and string
/// payloads.
pub fn lf_mention_spans(program: &FormalProgram) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |s: String| {
        let s = s.trim().to_string();
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };
    match &program.body {
        ProgramBody::Kopl(p) => {
            for f in p.functions() {
                for a in &f.args {
                    if !KOPL_NON_MENTIONS.contains(&a.as_str()) {
                        push(a.clone());
                    }
                }
            }
        }
        ProgramBody::Sparql(q) => {
            for (_, v) in q.values_bindings() {
                push(v);
            }
            if let Some(sexpr) = &q.companion_sexpr {
                for (tok, kind) in sexpr.leaves() {
                    if kind == LeafKind::Literal {
                        push(
                            strip_iri(tok)
                                .split("^^")
                                .next()
                                .unwrap_or(tok)
                                .trim_matches('"')
                                .to_string(),
                        );
                    }
                }
            }
        }
        ProgramBody::LambdaDcs(tree) => collect_ldcs_mentions(tree, None, &mut push),
    }
    out
}

fn collect_ldcs_mentions(tree: &BracketTree, parent: Option<&str>, push: &mut impl FnMut(String)) {
    match tree {
        BracketTree::Leaf { token, .. } => {
            if let Some(rest) = token.strip_prefix("en.") {
                let name = rest.rsplit('.').next().unwrap_or(rest);
                push(name.replace('_', " "));
            } else if parent == Some("string") && token.chars().any(|c| c.is_alphanumeric()) {
                push(token.replace('_', " "));
            }
        }
        BracketTree::Node { label, children } => {
            let l = label.as_deref().filter(|l| TYPED_WRAPPERS.contains(l) || *l == "call");
            for c in children {
                collect_ldcs_mentions(c, l.or(label.as_deref()), push);
            }
        }
    }
}
