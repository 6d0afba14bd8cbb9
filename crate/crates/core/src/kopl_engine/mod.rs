//! KoPL interpreter over a [`ToyKB`].
//!
//! Entity-set nodes carry, per entity, the fact that justified it (an
//! attribute fact from a filter or a relation fact from `Relate`), so the
//! qualifier filters can look at that fact's qualifiers.

pub mod kb;
pub mod value;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl_ast::{KoplOp, KoplProgram};
pub use kb::{neighborhood_names, Direction, Fact, KbDocument, KbError, KbStats, Qualifier, ToyKB, KB_SCHEMA_VERSION};
pub use value::{CompareOp, Value, ValueKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("{function} at {position} expects {expected} input, got {found}")]
    TypeMismatch {
        position: usize,
        function: &'static str,
        expected: &'static str,
        found: &'static str,
    },
    #[error("{function} at {position} got an empty entity set")]
    EmptyInput { position: usize, function: &'static str },
    #[error("{function} at {position}: {reason}")]
    BadArgument {
        position: usize,
        function: &'static str,
        reason: String,
    },
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("unknown qualifier {0:?}")]
    UnknownQualifier(String),
    #[error("{entity:?} has no fact for {key:?}")]
    MissingFact { entity: String, key: String },
    #[error("no relation from {subject:?} to {object:?}")]
    NoRelation { subject: String, object: String },
    #[error("unit mismatch: {left:?} vs {right:?}")]
    UnitMismatch { left: String, right: String },
    #[error("cannot compare {left} with {right}")]
    ValueKindMismatch { left: ValueKind, right: ValueKind },
    #[error("operator {op} is not defined on {kind} values")]
    BadOperator { op: String, kind: ValueKind },
}

/// The fact that put an entity into a set: (entity, index) into that
/// entity's attribute or relation list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactRef {
    Attr(usize, usize),
    Rel(usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntitySet {
    pub items: Vec<(usize, Option<FactRef>)>,
}

impl EntitySet {
    fn plain(ids: impl IntoIterator<Item = usize>) -> EntitySet {
        EntitySet {
            items: ids.into_iter().map(|e| (e, None)).collect(),
        }
    }

    /// Distinct entity handles, ascending (= id order).
    pub fn ids(&self) -> BTreeSet<usize> {
        self.items.iter().map(|(e, _)| *e).collect()
    }
}

/// Output of one program node.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeValue {
    Entities(EntitySet),
    Value(Value),
    Count(usize),
    Bool(bool),
    Relation(String),
    Names(Vec<String>),
}

impl NodeValue {
    fn class(&self) -> &'static str {
        match self {
            NodeValue::Entities(_) => "entity set",
            NodeValue::Value(_) => "value",
            NodeValue::Count(_) => "count",
            NodeValue::Bool(_) => "boolean",
            NodeValue::Relation(_) => "relation",
            NodeValue::Names(_) => "names",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Answer {
    /// Sorted, distinct.
    Names(Vec<String>),
    Value(Value),
    Count(usize),
    Boolean(bool),
    Relation(String),
}

impl Answer {
    /// Flat text form: names joined by `; `, booleans as yes/no.
    pub fn to_text(&self) -> String {
        match self {
            Answer::Names(n) => n.join("; "),
            Answer::Value(v) => v.to_string(),
            Answer::Count(c) => c.to_string(),
            Answer::Boolean(b) => if *b { "yes" } else { "no" }.to_string(),
            Answer::Relation(r) => r.clone(),
        }
    }

    /// Compares against a gold answer string; names as sets.
    pub fn matches_text(&self, gold: &str) -> bool {
        match self {
            Answer::Names(n) => {
                let ours: BTreeSet<&str> = n.iter().map(String::as_str).collect();
                let theirs: BTreeSet<&str> = gold.split("; ").map(str::trim).filter(|s| !s.is_empty()).collect();
                ours == theirs
            }
            other => other.to_text() == gold.trim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub nodes: Vec<NodeValue>,
    pub answer: Answer,
    /// Non-fatal ambiguities, e.g. several facts satisfying a condition.
    pub warnings: Vec<String>,
}

pub fn execute(program: &KoplProgram, kb: &ToyKB) -> Result<Answer, ExecError> {
    evaluate(program, kb).map(|x| x.answer)
}

/// Evaluates every node in program order and returns all intermediate
/// results.
pub fn evaluate(program: &KoplProgram, kb: &ToyKB) -> Result<Execution, ExecError> {
    let mut ctx = Ctx {
        kb,
        nodes: Vec::with_capacity(program.len()),
        warnings: Vec::new(),
    };
    for (pos, f) in program.functions().iter().enumerate() {
        let out = ctx.step(pos, f.op, &f.args, &f.deps)?;
        ctx.nodes.push(out);
    }
    let root = ctx.nodes.last().cloned().ok_or(ExecError::EmptyInput {
        position: 0,
        function: "program",
    })?;
    let answer = match root {
        NodeValue::Entities(set) => Answer::Names(ctx.names(&set)),
        NodeValue::Names(n) => Answer::Names(n),
        NodeValue::Value(v) => Answer::Value(v),
        NodeValue::Count(c) => Answer::Count(c),
        NodeValue::Bool(b) => Answer::Boolean(b),
        NodeValue::Relation(r) => Answer::Relation(r),
    };
    Ok(Execution {
        nodes: ctx.nodes,
        answer,
        warnings: ctx.warnings,
    })
}

struct Ctx<'a> {
    kb: &'a ToyKB,
    nodes: Vec<NodeValue>,
    warnings: Vec<String>,
}

fn filter_kind(op: KoplOp) -> ValueKind {
    match op {
        KoplOp::FilterStr | KoplOp::QFilterStr | KoplOp::VerifyStr => ValueKind::String,
        KoplOp::FilterNum | KoplOp::QFilterNum | KoplOp::VerifyNum => ValueKind::Number,
        KoplOp::FilterYear | KoplOp::QFilterYear | KoplOp::VerifyYear => ValueKind::Year,
        _ => ValueKind::Date,
    }
}

impl<'a> Ctx<'a> {
    fn names(&self, set: &EntitySet) -> Vec<String> {
        let names: BTreeSet<String> = set
            .ids()
            .into_iter()
            .map(|e| self.kb.entities[e].name.clone())
            .collect();
        names.into_iter().collect()
    }

    fn step(&mut self, pos: usize, op: KoplOp, args: &[String], deps: &[usize]) -> Result<NodeValue, ExecError> {
        let name = op.name();
        let arg = |i: usize| -> Result<&str, ExecError> {
            args.get(i).map(|s| s.trim()).ok_or_else(|| ExecError::BadArgument {
                position: pos,
                function: name,
                reason: format!("missing argument {}", i + 1),
            })
        };
        let bad = |reason: String| ExecError::BadArgument {
            position: pos,
            function: name,
            reason,
        };
        let kb = self.kb;
        match op {
            KoplOp::FindAll => Ok(NodeValue::Entities(EntitySet::plain(0..kb.len()))),
            KoplOp::Find => {
                let n = arg(0)?;
                let found = kb.entities_named(n);
                if found.is_empty() {
                    return Err(ExecError::UnknownEntity(n.to_string()));
                }
                Ok(NodeValue::Entities(EntitySet::plain(found.iter().copied())))
            }
            KoplOp::FilterConcept => {
                let n = arg(0)?;
                let cs = kb.concepts_named(n);
                if cs.is_empty() {
                    return Err(ExecError::UnknownConcept(n.to_string()));
                }
                let input = self.entities(pos, name, deps[0])?;
                let items = input
                    .items
                    .iter()
                    .filter(|(e, _)| cs.iter().any(|&c| kb.is_instance(*e, c)))
                    .copied()
                    .collect();
                Ok(NodeValue::Entities(EntitySet { items }))
            }
            KoplOp::FilterStr | KoplOp::FilterNum | KoplOp::FilterYear | KoplOp::FilterDate => {
                let key = arg(0)?;
                if !kb.has_attribute_key(key) {
                    return Err(ExecError::UnknownAttribute(key.to_string()));
                }
                let kind = filter_kind(op);
                let target =
                    Value::parse_as(kind, arg(1)?).ok_or_else(|| bad(format!("{:?} is not a {kind}", args[1])))?;
                let cmp = if op == KoplOp::FilterStr {
                    CompareOp::Eq
                } else {
                    CompareOp::parse(arg(2)?).ok_or_else(|| bad(format!("unknown operator {:?}", args[2])))?
                };
                let input = self.entities(pos, name, deps[0])?;
                let mut items = Vec::new();
                for e in input.ids() {
                    for (i, f) in kb.entities[e].attributes.iter().enumerate() {
                        if f.key == key && f.value.fits(kind) && f.value.compare(cmp, &target)? {
                            items.push((e, Some(FactRef::Attr(e, i))));
                        }
                    }
                }
                Ok(NodeValue::Entities(EntitySet { items }))
            }
            KoplOp::QFilterStr | KoplOp::QFilterNum | KoplOp::QFilterYear | KoplOp::QFilterDate => {
                let qkey = arg(0)?;
                if !kb.has_qualifier_key(qkey) {
                    return Err(ExecError::UnknownQualifier(qkey.to_string()));
                }
                let kind = filter_kind(op);
                let target =
                    Value::parse_as(kind, arg(1)?).ok_or_else(|| bad(format!("{:?} is not a {kind}", args[1])))?;
                let cmp = if op == KoplOp::QFilterStr {
                    CompareOp::Eq
                } else {
                    CompareOp::parse(arg(2)?).ok_or_else(|| bad(format!("unknown operator {:?}", args[2])))?
                };
                let input = self.entities(pos, name, deps[0])?;
                let mut items = Vec::new();
                for &(e, fact) in &input.items {
                    let Some(fact) = fact else { continue };
                    let mut keep = false;
                    for q in self.qualifiers(fact) {
                        if q.key == qkey && q.value.fits(kind) && q.value.compare(cmp, &target)? {
                            keep = true;
                        }
                    }
                    if keep {
                        items.push((e, Some(fact)));
                    }
                }
                Ok(NodeValue::Entities(EntitySet { items }))
            }
            KoplOp::Relate => {
                let pred = arg(0)?;
                if !kb.has_predicate(pred) {
                    return Err(ExecError::UnknownRelation(pred.to_string()));
                }
                let dir = Direction::parse(arg(1)?).ok_or_else(|| bad(format!("unknown direction {:?}", args[1])))?;
                let input = self.entities(pos, name, deps[0])?;
                let mut items = Vec::new();
                for e in input.ids() {
                    for (i, r) in kb.entities[e].relations.iter().enumerate() {
                        if r.predicate == pred && r.direction == dir {
                            items.push((r.object, Some(FactRef::Rel(e, i))));
                        }
                    }
                }
                Ok(NodeValue::Entities(EntitySet { items }))
            }
            KoplOp::And | KoplOp::Or => {
                let a = self.entities(pos, name, deps[0])?.ids();
                let b = self.entities(pos, name, deps[1])?.ids();
                let ids: Vec<usize> = if op == KoplOp::And {
                    a.intersection(&b).copied().collect()
                } else {
                    a.union(&b).copied().collect()
                };
                Ok(NodeValue::Entities(EntitySet::plain(ids)))
            }
            KoplOp::What => {
                let set = self.entities(pos, name, deps[0])?;
                Ok(NodeValue::Names(self.names(set)))
            }
            KoplOp::Count => Ok(NodeValue::Count(self.entities(pos, name, deps[0])?.ids().len())),
            KoplOp::QueryAttr => {
                let key = arg(0)?;
                let e = self.single(pos, name, deps[0])?;
                let f = self.attr_facts(e, key)?.next().ok_or_else(|| self.missing(e, key))?;
                Ok(NodeValue::Value(f.value.clone()))
            }
            KoplOp::QueryAttrUnderCondition => {
                let (key, qkey, qval) = (arg(0)?, arg(1)?, arg(2)?);
                if !kb.has_qualifier_key(qkey) {
                    return Err(ExecError::UnknownQualifier(qkey.to_string()));
                }
                let e = self.single(pos, name, deps[0])?;
                let hits: Vec<&Fact> = self
                    .attr_facts(e, key)?
                    .filter(|f| {
                        f.qualifiers
                            .iter()
                            .any(|q| q.key == qkey && value_matches_text(&q.value, qval))
                    })
                    .collect();
                if hits.len() > 1 {
                    self.warnings.push(format!(
                        "{name} at {pos}: {} facts satisfy {qkey} = {qval}, using the first",
                        hits.len()
                    ));
                }
                let f = hits.first().ok_or_else(|| self.missing(e, key))?;
                Ok(NodeValue::Value(f.value.clone()))
            }
            KoplOp::QueryRelation => {
                let s = self.single(pos, name, deps[0])?;
                let o = self.single(pos, name, deps[1])?;
                let rels = &kb.entities[s].relations;
                let r = rels
                    .iter()
                    .filter(|r| r.object == o)
                    .min_by_key(|r| (r.direction != Direction::Forward, r.predicate.clone()))
                    .ok_or_else(|| ExecError::NoRelation {
                        subject: kb.entities[s].name.clone(),
                        object: kb.entities[o].name.clone(),
                    })?;
                Ok(NodeValue::Relation(r.predicate.clone()))
            }
            KoplOp::SelectBetween => {
                let key = arg(0)?;
                let greater = match arg(1)? {
                    "greater" => true,
                    "less" => false,
                    other => return Err(bad(format!("expected greater or less, got {other:?}"))),
                };
                let a = self.single(pos, name, deps[0])?;
                let b = self.single(pos, name, deps[1])?;
                let va = self.attr_facts(a, key)?.next().ok_or_else(|| self.missing(a, key))?;
                let vb = self.attr_facts(b, key)?.next().ok_or_else(|| self.missing(b, key))?;
                let ord = va.value.order(&vb.value)?;
                let a_wins = match ord {
                    std::cmp::Ordering::Equal => a <= b,
                    std::cmp::Ordering::Greater => greater,
                    std::cmp::Ordering::Less => !greater,
                };
                Ok(NodeValue::Entities(EntitySet::plain([if a_wins { a } else { b }])))
            }
            KoplOp::SelectAmong => {
                let key = arg(0)?;
                let largest = match arg(1)? {
                    "largest" => true,
                    "smallest" => false,
                    other => return Err(bad(format!("expected largest or smallest, got {other:?}"))),
                };
                let ids = self.entities(pos, name, deps[0])?.ids();
                if !kb.has_attribute_key(key) {
                    return Err(ExecError::UnknownAttribute(key.to_string()));
                }
                let mut best: Option<(usize, &Value)> = None;
                for e in ids {
                    let Some(f) = self.attr_facts(e, key)?.next() else {
                        continue;
                    };
                    let better = match best {
                        None => true,
                        Some((_, v)) => {
                            let ord = f.value.order(v)?;
                            if largest {
                                ord.is_gt()
                            } else {
                                ord.is_lt()
                            }
                        }
                    };
                    if better {
                        best = Some((e, &f.value));
                    }
                }
                let (e, _) = best.ok_or(ExecError::EmptyInput {
                    position: pos,
                    function: name,
                })?;
                Ok(NodeValue::Entities(EntitySet::plain([e])))
            }
            KoplOp::VerifyStr => {
                let v = self.value(pos, name, deps[0])?;
                Ok(NodeValue::Bool(v.to_string() == arg(0)?))
            }
            KoplOp::VerifyNum | KoplOp::VerifyYear | KoplOp::VerifyDate => {
                let kind = filter_kind(op);
                let target =
                    Value::parse_as(kind, arg(0)?).ok_or_else(|| bad(format!("{:?} is not a {kind}", args[0])))?;
                let cmp = CompareOp::parse(arg(1)?).ok_or_else(|| bad(format!("unknown operator {:?}", args[1])))?;
                let v = self.value(pos, name, deps[0])?;
                if !v.fits(kind) {
                    return Err(ExecError::ValueKindMismatch {
                        left: v.kind(),
                        right: kind,
                    });
                }
                Ok(NodeValue::Bool(v.compare(cmp, &target)?))
            }
            KoplOp::QueryAttrQualifier => {
                let (key, val, qkey) = (arg(0)?, arg(1)?, arg(2)?);
                if !kb.has_qualifier_key(qkey) {
                    return Err(ExecError::UnknownQualifier(qkey.to_string()));
                }
                let e = self.single(pos, name, deps[0])?;
                let q = self
                    .attr_facts(e, key)?
                    .filter(|f| value_matches_text(&f.value, val))
                    .flat_map(|f| f.qualifiers.iter())
                    .find(|q| q.key == qkey)
                    .ok_or_else(|| self.missing(e, qkey))?;
                Ok(NodeValue::Value(q.value.clone()))
            }
            KoplOp::QueryRelationQualifier => {
                let (pred, qkey) = (arg(0)?, arg(1)?);
                if !kb.has_predicate(pred) {
                    return Err(ExecError::UnknownRelation(pred.to_string()));
                }
                let s = self.single(pos, name, deps[0])?;
                let o = self.single(pos, name, deps[1])?;
                let q = kb.entities[s]
                    .relations
                    .iter()
                    .filter(|r| r.predicate == pred && r.object == o)
                    .flat_map(|r| r.qualifiers.iter())
                    .find(|q| q.key == qkey)
                    .ok_or_else(|| self.missing(s, qkey))?;
                Ok(NodeValue::Value(q.value.clone()))
            }
        }
    }

    fn input(&self, dep: usize) -> &NodeValue {
        &self.nodes[dep]
    }

    fn entities(&self, pos: usize, function: &'static str, dep: usize) -> Result<&EntitySet, ExecError> {
        match self.input(dep) {
            NodeValue::Entities(s) => Ok(s),
            other => Err(ExecError::TypeMismatch {
                position: pos,
                function,
                expected: "entity set",
                found: other.class(),
            }),
        }
    }

    fn value(&self, pos: usize, function: &'static str, dep: usize) -> Result<&Value, ExecError> {
        match self.input(dep) {
            NodeValue::Value(v) => Ok(v),
            other => Err(ExecError::TypeMismatch {
                position: pos,
                function,
                expected: "value",
                found: other.class(),
            }),
        }
    }

    /// The single entity a query function operates on. With several, the
    /// smallest id is used and a warning recorded.
    fn single(&mut self, pos: usize, function: &'static str, dep: usize) -> Result<usize, ExecError> {
        let ids = self.entities(pos, function, dep)?.ids();
        let first = *ids.first().ok_or(ExecError::EmptyInput {
            position: pos,
            function,
        })?;
        if ids.len() > 1 {
            self.warnings
                .push(format!("{function} at {pos}: {} entities, using the first", ids.len()));
        }
        Ok(first)
    }

    fn attr_facts(&self, e: usize, key: &'a str) -> Result<impl Iterator<Item = &'a Fact> + 'a, ExecError> {
        if !self.kb.has_attribute_key(key) {
            return Err(ExecError::UnknownAttribute(key.to_string()));
        }
        Ok(self.kb.entities[e].attributes.iter().filter(move |f| f.key == key))
    }

    fn qualifiers(&self, fact: FactRef) -> &'a [Qualifier] {
        match fact {
            FactRef::Attr(e, i) => &self.kb.entities[e].attributes[i].qualifiers,
            FactRef::Rel(e, i) => &self.kb.entities[e].relations[i].qualifiers,
        }
    }

    fn missing(&self, e: usize, key: &str) -> ExecError {
        ExecError::MissingFact {
            entity: self.kb.entities[e].name.clone(),
            key: key.to_string(),
        }
    }
}

/// Equality between a stored value and argument text, parsing the text as
/// the stored value's kind.
fn value_matches_text(v: &Value, text: &str) -> bool {
    Value::parse_as(v.kind(), text)
        .and_then(|t| v.compare(CompareOp::Eq, &t).ok())
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl_ast::parse_kopl;

    const MICRO: &str = r#"{"version": 1,
        "concepts": [{"id": "c_human", "name": "human"}, {"id": "c_city", "name": "city"}],
        "entities": [
            {"id": "e1", "name": "Alan", "concepts": ["c_human"],
             "attributes": [{"key": "date of birth", "value": {"kind": "date", "value": "1956-04-19"}}]},
            {"id": "e2", "name": "Beth", "concepts": ["c_human"],
             "attributes": [{"key": "date of birth", "value": {"kind": "date", "value": "1977-03-10"}}]},
            {"id": "e3", "name": "Paris", "concepts": ["c_city"],
             "attributes": [{"key": "population", "value": {"kind": "number", "value": 2100000}}]}
        ]}"#;

    fn run(text: &str) -> Result<Answer, ExecError> {
        let kb = ToyKB::from_json(MICRO).unwrap();
        execute(&parse_kopl(text).unwrap(), &kb)
    }

    #[test]
    fn micro_kb_examples() {
        assert_eq!(run("FindAll().Count()").unwrap(), Answer::Count(3));
        assert_eq!(
            run("FindAll().FilterDate(date of birth, 1956-04-19, =).FilterConcept(human).What()").unwrap(),
            Answer::Names(vec!["Alan".into()])
        );
        assert_eq!(run("Find(Paris).QueryAttr(population)").unwrap().to_text(), "2100000");
        assert_eq!(
            run("Find(Alan).QueryAttr(date of birth).VerifyYear(2017, <)").unwrap(),
            Answer::Boolean(true)
        );
    }

    #[test]
    fn execution_errors() {
        assert!(matches!(run("Find(Nobody).What()"), Err(ExecError::UnknownEntity(_))));
        assert!(matches!(
            run("FindAll().FilterConcept(robot).Count()"),
            Err(ExecError::UnknownConcept(_))
        ));
        assert!(matches!(
            run("Find(Alan).QueryAttr(height)"),
            Err(ExecError::UnknownAttribute(_))
        ));
        assert!(matches!(
            run("FindAll().FilterConcept(city).FilterConcept(human).QueryAttr(population)"),
            Err(ExecError::EmptyInput { .. })
        ));
        assert!(matches!(
            run("FindAll().Count().Count()"),
            Err(ExecError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn answer_text_matching() {
        assert!(Answer::Names(vec!["a".into(), "b".into()]).matches_text("b; a"));
        assert!(Answer::Boolean(false).matches_text("no"));
        assert!(!Answer::Count(2).matches_text("3"));
    }
}
