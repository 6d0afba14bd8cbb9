//! Linking generated names to knowledge-base vocabulary entries.
//!
//! Names are indexed with BM25 over two token families: lowercase words and
//! character trigrams (prefixed `3:`), which copes with dotted Freebase-style
//! relation names whose segments are only partially right.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl_ast::bracket::BracketTree;
use crate::fl_ast::sparql::IriRole;
use crate::fl_ast::{FormalProgram, KoplOp, ProgramBody};
use crate::kopl_engine::{neighborhood_names, ToyKB};
use crate::retrieval::{Bm25Index, Bm25Params};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("name to link is empty")]
    EmptyName,
    #[error("no vocabulary entry resembles {0:?}")]
    Unlinked(String),
    #[error("unknown entity id {0:?}")]
    UnknownEntity(String),
    #[error("vocabulary file line {line}: {reason}")]
    Vocab { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameKind {
    Entity,
    Relation,
    Concept,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: String,
    pub name: String,
    pub kind: NameKind,
}

/// Reads a JSONL vocabulary of `{id, name, kind}` objects; blank lines are
/// skipped.
pub fn load_vocab(path: &Path) -> Result<Vec<VocabEntry>, LinkError> {
    let file = std::fs::File::open(path).map_err(|e| LinkError::Vocab {
        line: 0,
        reason: format!("{}: {e}", path.display()),
    })?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LinkError::Vocab {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LinkError::Vocab {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Lowercase alphanumeric words followed by the `3:`-prefixed character
/// trigrams of the lowercased name.
pub fn name_tokens(name: &str) -> Vec<String> {
    let lower = name.trim().to_lowercase();
    let mut out: Vec<String> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect();
    let chars: Vec<char> = lower.chars().collect();
    if chars.len() < 3 {
        if !chars.is_empty() {
            out.push(format!("3:{lower}"));
        }
    } else {
        out.extend(chars.windows(3).map(|w| format!("3:{}", w.iter().collect::<String>())));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameIndex {
    pub vocabulary: Vec<VocabEntry>,
    pub bm25: Bm25Index,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkHit {
    pub position: usize,
    pub id: String,
    pub name: String,
    pub kind: NameKind,
    pub score: f64,
    pub exact: bool,
}

pub fn build_name_index(vocab: Vec<VocabEntry>) -> Result<NameIndex, LinkError> {
    if vocab.is_empty() {
        return Err(LinkError::EmptyVocabulary);
    }
    let docs = vocab
        .iter()
        .enumerate()
        .map(|(i, e)| (format!("{i:08}"), name_tokens(&e.name)))
        .collect();
    let bm25 = Bm25Index::build(docs, Bm25Params::default()).map_err(|_| LinkError::EmptyVocabulary)?;
    Ok(NameIndex {
        vocabulary: vocab,
        bm25,
    })
}

impl NameIndex {
    /// Candidates of `kind` (all kinds when `None`) ranked by exact-name
    /// match, then BM25 score, then vocabulary position. Zero-score
    /// non-exact entries are dropped.
    pub fn search(&self, name: &str, kind: Option<NameKind>, top_n: usize) -> Vec<LinkHit> {
        let scores = self.bm25.scores(&name_tokens(name));
        let needle = name.trim();
        let mut hits: Vec<LinkHit> = self
            .vocabulary
            .iter()
            .enumerate()
            .filter(|(_, e)| kind.is_none_or(|k| e.kind == k))
            .map(|(i, e)| LinkHit {
                position: i,
                id: e.id.clone(),
                name: e.name.clone(),
                kind: e.kind,
                score: scores[i],
                exact: e.name == needle,
            })
            .filter(|h| h.exact || h.score > 0.0)
            .collect();
        hits.sort_by(|a, b| {
            b.exact
                .cmp(&a.exact)
                .then(b.score.total_cmp(&a.score))
                .then(a.position.cmp(&b.position))
        });
        hits.truncate(top_n);
        hits
    }

    pub fn contains_id(&self, id: &str, kind: NameKind) -> bool {
        self.vocabulary.iter().any(|e| e.id == id && e.kind == kind)
    }
}

/// Vocabulary of a toy KB: entity names, concept names, and predicates plus
/// attribute keys as relations. KoPL refers to all of these by name, so
/// names double as ids.
pub fn vocab_from_kb(kb: &ToyKB) -> Vec<VocabEntry> {
    let mut out: Vec<VocabEntry> = kb
        .entities
        .iter()
        .map(|e| VocabEntry {
            id: e.id.clone(),
            name: e.name.clone(),
            kind: NameKind::Entity,
        })
        .collect();
    let concepts: std::collections::BTreeSet<&str> = kb.concepts.iter().map(|c| c.name.as_str()).collect();
    let relations: std::collections::BTreeSet<&str> = kb.predicates().union(&kb.attribute_keys()).copied().collect();
    for (names, kind) in [(concepts, NameKind::Concept), (relations, NameKind::Relation)] {
        out.extend(names.into_iter().map(|n| VocabEntry {
            id: n.to_string(),
            name: n.to_string(),
            kind,
        }));
    }
    out
}

/// Best entry of the requested kind for a generated name.
pub fn link(index: &NameIndex, generated: &str, kind: Option<NameKind>) -> Result<LinkHit, LinkError> {
    if generated.trim().is_empty() {
        return Err(LinkError::EmptyName);
    }
    index
        .search(generated, kind, 1)
        .into_iter()
        .next()
        .ok_or_else(|| LinkError::Unlinked(generated.to_string()))
}

/// Entity and predicate names within two relation hops of `entity_id`.
pub fn two_hop_context(kb: &ToyKB, entity_id: &str) -> Result<Vec<String>, LinkError> {
    hop_context(kb, entity_id, 2)
}

pub fn hop_context(kb: &ToyKB, entity_id: &str, radius: usize) -> Result<Vec<String>, LinkError> {
    let e = kb
        .entity_by_id(entity_id)
        .ok_or_else(|| LinkError::UnknownEntity(entity_id.to_string()))?;
    Ok(neighborhood_names(kb, e, radius))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    /// (original, replacement, kind)
    pub replaced: Vec<(String, String, NameKind)>,
    pub unlinked: Vec<String>,
}

impl LinkReport {
    fn resolve(&mut self, index: &NameIndex, text: &str, kind: NameKind, use_id: bool) -> String {
        if index
            .vocabulary
            .iter()
            .any(|e| e.kind == kind && (e.id == text || (!use_id && e.name == text)))
        {
            return text.to_string();
        }
        match link(index, text, Some(kind)) {
            Ok(hit) => {
                let to = if use_id { hit.id } else { hit.name };
                self.replaced.push((text.to_string(), to.clone(), kind));
                to
            }
            Err(_) => {
                self.unlinked.push(text.to_string());
                text.to_string()
            }
        }
    }
}

fn kopl_arg_kind(op: KoplOp, idx: usize) -> Option<NameKind> {
    match (op, idx) {
        (KoplOp::Find, 0) => Some(NameKind::Entity),
        (KoplOp::FilterConcept, 0) => Some(NameKind::Concept),
        (KoplOp::Relate, 0) | (KoplOp::QueryRelationQualifier, 0) => Some(NameKind::Relation),
        (
            KoplOp::FilterStr
            | KoplOp::FilterNum
            | KoplOp::FilterYear
            | KoplOp::FilterDate
            | KoplOp::QueryAttr
            | KoplOp::QueryAttrUnderCondition
            | KoplOp::QueryAttrQualifier
            | KoplOp::SelectBetween
            | KoplOp::SelectAmong,
            0,
        ) => Some(NameKind::Relation),
        _ => None,
    }
}

/// Rewrites the KB-facing names of a generated program to their nearest
/// vocabulary entries. KoPL keeps names; SPARQL and Lambda DCS get ids.
/// Kinds absent from the vocabulary are left alone.
pub fn link_program(program: &FormalProgram, index: &NameIndex) -> (FormalProgram, LinkReport) {
    let mut report = LinkReport::default();
    let has_kind = |k: NameKind| index.vocabulary.iter().any(|e| e.kind == k);
    let body = match &program.body {
        ProgramBody::Kopl(p) => ProgramBody::Kopl(p.map_args(|op, i, arg| match kopl_arg_kind(op, i) {
            Some(k) if has_kind(k) => report.resolve(index, arg, k, false),
            _ => arg.to_string(),
        })),
        ProgramBody::Sparql(q) => ProgramBody::Sparql(q.map_iris(|role, iri| {
            let kind = match role {
                IriRole::Predicate => NameKind::Relation,
                IriRole::Class => NameKind::Concept,
                IriRole::Entity | IriRole::Value => NameKind::Entity,
            };
            if iri.starts_with('<') || !has_kind(kind) || iri.ends_with(":type.object.type") {
                return iri.to_string();
            }
            let (prefix, local) = match iri.find(':') {
                Some(i) => iri.split_at(i + 1),
                None => ("", iri),
            };
            format!("{prefix}{}", report.resolve(index, local, kind, true))
        })),
        ProgramBody::LambdaDcs(t) => {
            ProgramBody::LambdaDcs(link_ldcs(t, index, &mut report, has_kind(NameKind::Entity)))
        }
    };
    let source_text = if body == program.body {
        program.source_text.clone()
    } else {
        FormalProgram {
            body: body.clone(),
            source_text: String::new(),
        }
        .canonical()
    };
    let out = FormalProgram { body, source_text };
    (out, report)
}

fn link_ldcs(tree: &BracketTree, index: &NameIndex, report: &mut LinkReport, entities: bool) -> BracketTree {
    tree.map_leaves(&mut |token, _| {
        if entities && token.starts_with("en.") {
            report.resolve(index, token, NameKind::Entity, true)
        } else {
            token.to_string()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl_ast::Language;

    fn entry(id: &str, name: &str, kind: NameKind) -> VocabEntry {
        VocabEntry {
            id: id.into(),
            name: name.into(),
            kind,
        }
    }

    fn relations() -> NameIndex {
        build_name_index(vec![
            entry(
                "business.business_operation.industry",
                "business.business_operation.industry",
                NameKind::Relation,
            ),
            entry(
                "business.industry.companies",
                "business.industry.companies",
                NameKind::Relation,
            ),
            entry(
                "people.person.nationality",
                "people.person.nationality",
                NameKind::Relation,
            ),
            entry("m.05lfsg", "software", NameKind::Entity),
            entry("m.0abc", "software", NameKind::Entity),
        ])
        .unwrap()
    }

    #[test]
    fn tokens_are_words_and_trigrams() {
        assert_eq!(name_tokens("Ab.c"), vec!["ab", "c", "3:ab.", "3:b.c"]);
        assert_eq!(name_tokens("x"), vec!["x", "3:x"]);
    }

    #[test]
    fn links_hallucinated_relation() {
        let idx = relations();
        let hit = link(&idx, "business.business_operation.business", Some(NameKind::Relation)).unwrap();
        assert_eq!(hit.id, "business.business_operation.industry");
        let hit = link(&idx, "people.person.nationality", None).unwrap();
        assert!(hit.exact);
        assert!(matches!(link(&idx, "zzzz", None), Err(LinkError::Unlinked(_))));
        assert!(matches!(link(&idx, " ", None), Err(LinkError::EmptyName)));
        assert!(build_name_index(vec![]).is_err());
    }

    #[test]
    fn sibling_relations_are_lexically_ambiguous() {
        // Nothing in "business" points at "industry" over "revenue"; the
        // shorter sibling wins on length normalization.
        let idx = build_name_index(vec![
            entry("r1", "business.business_operation.industry", NameKind::Relation),
            entry("r2", "business.business_operation.revenue", NameKind::Relation),
        ])
        .unwrap();
        let hits = idx.search("business.business_operation.business", None, 2);
        assert_eq!(hits[0].id, "r2");
        assert!(hits[0].score - hits[1].score < 0.2);
    }

    #[test]
    fn duplicate_names_both_retrievable() {
        let idx = relations();
        let hits = idx.search("software", Some(NameKind::Entity), 5);
        let ids: Vec<_> = hits.iter().map(|h| h.id.as_str()).collect();
        assert_eq!(ids, vec!["m.05lfsg", "m.0abc"]);
    }

    #[test]
    fn sparql_link_pass_keeps_query_parseable() {
        let q = "SELECT (?x0 AS ?value) WHERE { SELECT DISTINCT ?x0 WHERE { ?x0 :type.object.type :business.business_operation . VALUES ?x1 { :m.05lfsg } ?x0 :business.business_operation.business ?x1 . FILTER ( ?x0 != ?x1 ) } }";
        let p = FormalProgram::parse(Language::Sparql, q).unwrap();
        let (linked, report) = link_program(&p, &relations());
        assert_eq!(report.replaced.len(), 1);
        let text = linked.canonical();
        assert!(text.contains(":business.business_operation.industry ?x1"));
        assert!(text.contains("VALUES ?x1 { :m.05lfsg }"));
        FormalProgram::parse(Language::Sparql, &text).unwrap();
    }

    #[test]
    fn kopl_link_pass_uses_names() {
        let idx = build_name_index(vec![
            entry("Q1", "Walt Disney Pictures", NameKind::Entity),
            entry("P1", "production company", NameKind::Relation),
        ])
        .unwrap();
        let p = FormalProgram::parse(
            Language::Kopl,
            "Find(Walt Disney Picture).Relate(production companies, backward).Count()",
        )
        .unwrap();
        let (linked, report) = link_program(&p, &idx);
        assert_eq!(
            linked.canonical(),
            "Find(Walt Disney Pictures).Relate(production company, backward).Count()"
        );
        assert_eq!(report.replaced.len(), 2);
    }
}
