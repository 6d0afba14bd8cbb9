//! The in-memory toy knowledge base and its JSON document form.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::value::{normalize_unit, Value};

pub const KB_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unsupported KB version {0} (expected {KB_SCHEMA_VERSION})")]
    Version(u32),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("{owner:?} references unknown id {id:?}")]
    DanglingId { owner: String, id: String },
    #[error("concept hierarchy has a cycle through {0:?}")]
    CyclicConcepts(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Direction> {
        match s.trim() {
            "forward" => Some(Direction::Forward),
            "backward" => Some(Direction::Backward),
            _ => None,
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qualifier {
    pub key: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub key: String,
    pub value: Value,
    #[serde(default)]
    pub qualifiers: Vec<Qualifier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationDoc {
    pub predicate: String,
    pub direction: Direction,
    pub object: String,
    #[serde(default)]
    pub qualifiers: Vec<Qualifier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDoc {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub subclass_of: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDoc {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub concepts: Vec<String>,
    #[serde(default)]
    pub attributes: Vec<Fact>,
    #[serde(default)]
    pub relations: Vec<RelationDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbDocument {
    pub version: u32,
    #[serde(default)]
    pub concepts: Vec<ConceptDoc>,
    #[serde(default)]
    pub entities: Vec<EntityDoc>,
}

/// A relation fact as seen from its subject.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationFact {
    pub predicate: String,
    pub direction: Direction,
    pub object: usize,
    pub qualifiers: Vec<Qualifier>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub concepts: Vec<usize>,
    pub attributes: Vec<Fact>,
    pub relations: Vec<RelationFact>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub id: String,
    pub name: String,
    pub subclass_of: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbStats {
    pub entities: usize,
    pub concepts: usize,
    pub attribute_facts: usize,
    /// Relation facts counting both direction views.
    pub relation_views: usize,
}

/// Validated, immutable knowledge base. Entities are ordered by id, and
/// entity positions double as handles.
#[derive(Debug, Clone)]
pub struct ToyKB {
    pub entities: Vec<Entity>,
    pub concepts: Vec<Concept>,
    by_id: HashMap<String, usize>,
    by_name: HashMap<String, Vec<usize>>,
    concepts_by_name: HashMap<String, Vec<usize>>,
    /// All concepts of each entity, subclass closure included.
    closure: Vec<BTreeSet<usize>>,
    attribute_keys: HashSet<String>,
    predicates: HashSet<String>,
    qualifier_keys: HashSet<String>,
}

fn normalize_value(v: &mut Value) {
    if let Value::Number { unit, .. } = v {
        *unit = normalize_unit(unit.as_deref());
    }
}

fn normalize_qualifiers(qs: &mut [Qualifier]) {
    for q in qs {
        normalize_value(&mut q.value);
    }
}

impl ToyKB {
    pub fn load(path: &Path) -> Result<ToyKB, KbError> {
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ToyKB::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<ToyKB, KbError> {
        let doc: KbDocument = serde_json::from_str(text).map_err(|e| KbError::Schema(e.to_string()))?;
        ToyKB::from_document(doc)
    }

    pub fn from_document(mut doc: KbDocument) -> Result<ToyKB, KbError> {
        if doc.version != KB_SCHEMA_VERSION {
            return Err(KbError::Version(doc.version));
        }
        doc.entities.sort_by(|a, b| a.id.cmp(&b.id));
        doc.concepts.sort_by(|a, b| a.id.cmp(&b.id));

        let mut concept_idx = HashMap::new();
        for (i, c) in doc.concepts.iter().enumerate() {
            if concept_idx.insert(c.id.clone(), i).is_some() {
                return Err(KbError::DuplicateId(c.id.clone()));
            }
        }
        let mut by_id = HashMap::new();
        for (i, e) in doc.entities.iter().enumerate() {
            if by_id.insert(e.id.clone(), i).is_some() || concept_idx.contains_key(&e.id) {
                return Err(KbError::DuplicateId(e.id.clone()));
            }
        }
        let resolve = |map: &HashMap<String, usize>, owner: &str, id: &str| {
            map.get(id).copied().ok_or_else(|| KbError::DanglingId {
                owner: owner.to_string(),
                id: id.to_string(),
            })
        };

        let mut concepts = Vec::with_capacity(doc.concepts.len());
        for c in &doc.concepts {
            let subclass_of = c
                .subclass_of
                .iter()
                .map(|p| resolve(&concept_idx, &c.id, p))
                .collect::<Result<Vec<_>, _>>()?;
            concepts.push(Concept {
                id: c.id.clone(),
                name: c.name.clone(),
                subclass_of,
            });
        }
        check_acyclic(&concepts)?;

        let mut entities = Vec::with_capacity(doc.entities.len());
        for e in &doc.entities {
            let cs = e
                .concepts
                .iter()
                .map(|c| resolve(&concept_idx, &e.id, c))
                .collect::<Result<Vec<_>, _>>()?;
            let mut attributes = e.attributes.clone();
            for f in &mut attributes {
                normalize_value(&mut f.value);
                normalize_qualifiers(&mut f.qualifiers);
            }
            let mut relations = Vec::with_capacity(e.relations.len());
            for r in &e.relations {
                let mut qualifiers = r.qualifiers.clone();
                normalize_qualifiers(&mut qualifiers);
                relations.push(RelationFact {
                    predicate: r.predicate.clone(),
                    direction: r.direction,
                    object: resolve(&by_id, &e.id, &r.object)?,
                    qualifiers,
                });
            }
            entities.push(Entity {
                id: e.id.clone(),
                name: e.name.clone(),
                concepts: cs,
                attributes,
                relations,
            });
        }

        // every relation is visible from both ends
        let mut inverse: Vec<(usize, RelationFact)> = Vec::new();
        for (s, e) in entities.iter().enumerate() {
            for r in &e.relations {
                let view = RelationFact {
                    predicate: r.predicate.clone(),
                    direction: r.direction.reverse(),
                    object: s,
                    qualifiers: r.qualifiers.clone(),
                };
                let target = &entities[r.object];
                let present = target
                    .relations
                    .iter()
                    .any(|x| x.predicate == view.predicate && x.direction == view.direction && x.object == s);
                if !present && !inverse.iter().any(|(t, v)| *t == r.object && *v == view) {
                    inverse.push((r.object, view));
                }
            }
        }
        for (t, view) in inverse {
            entities[t].relations.push(view);
        }

        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        let mut attribute_keys = HashSet::new();
        let mut predicates = HashSet::new();
        let mut qualifier_keys = HashSet::new();
        for (i, e) in entities.iter().enumerate() {
            by_name.entry(e.name.clone()).or_default().push(i);
            for f in &e.attributes {
                attribute_keys.insert(f.key.clone());
                qualifier_keys.extend(f.qualifiers.iter().map(|q| q.key.clone()));
            }
            for r in &e.relations {
                predicates.insert(r.predicate.clone());
                qualifier_keys.extend(r.qualifiers.iter().map(|q| q.key.clone()));
            }
        }
        let mut concepts_by_name: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, c) in concepts.iter().enumerate() {
            concepts_by_name.entry(c.name.clone()).or_default().push(i);
        }
        let closure = entities
            .iter()
            .map(|e| {
                let mut seen = BTreeSet::new();
                let mut stack = e.concepts.clone();
                while let Some(c) = stack.pop() {
                    if seen.insert(c) {
                        stack.extend(&concepts[c].subclass_of);
                    }
                }
                seen
            })
            .collect();

        Ok(ToyKB {
            entities,
            concepts,
            by_id,
            by_name,
            concepts_by_name,
            closure,
            attribute_keys,
            predicates,
            qualifier_keys,
        })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity_by_id(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn entities_named(&self, name: &str) -> &[usize] {
        self.by_name.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn concepts_named(&self, name: &str) -> &[usize] {
        self.concepts_by_name.get(name).map_or(&[], Vec::as_slice)
    }

    /// Whether entity `e` belongs to concept `c`, directly or through
    /// subclasses.
    pub fn is_instance(&self, e: usize, c: usize) -> bool {
        self.closure[e].contains(&c)
    }

    pub fn has_attribute_key(&self, key: &str) -> bool {
        self.attribute_keys.contains(key)
    }

    pub fn has_predicate(&self, p: &str) -> bool {
        self.predicates.contains(p)
    }

    pub fn has_qualifier_key(&self, k: &str) -> bool {
        self.qualifier_keys.contains(k)
    }

    pub fn attribute_keys(&self) -> BTreeSet<&str> {
        self.attribute_keys.iter().map(String::as_str).collect()
    }

    pub fn predicates(&self) -> BTreeSet<&str> {
        self.predicates.iter().map(String::as_str).collect()
    }

    pub fn stats(&self) -> KbStats {
        KbStats {
            entities: self.entities.len(),
            concepts: self.concepts.len(),
            attribute_facts: self.entities.iter().map(|e| e.attributes.len()).sum(),
            relation_views: self.entities.iter().map(|e| e.relations.len()).sum(),
        }
    }
}

fn check_acyclic(concepts: &[Concept]) -> Result<(), KbError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; concepts.len()];
    fn visit(c: usize, concepts: &[Concept], state: &mut [u8]) -> Result<(), usize> {
        match state[c] {
            1 => return Err(c),
            2 => return Ok(()),
            _ => {}
        }
        state[c] = 1;
        for &p in &concepts[c].subclass_of {
            visit(p, concepts, state)?;
        }
        state[c] = 2;
        Ok(())
    }
    for c in 0..concepts.len() {
        visit(c, concepts, &mut state).map_err(|bad| KbError::CyclicConcepts(concepts[bad].id.clone()))?;
    }
    Ok(())
}

/// Names of entities and predicates reachable from `entity` within `radius`
/// relation hops, the entity itself excluded; deduplicated and sorted.
pub fn neighborhood_names(kb: &ToyKB, entity: usize, radius: usize) -> Vec<String> {
    let mut names = BTreeSet::new();
    let mut visited = HashSet::from([entity]);
    let mut frontier = vec![entity];
    for _ in 0..radius {
        let mut next = Vec::new();
        for &e in &frontier {
            for r in &kb.entities[e].relations {
                names.insert(r.predicate.clone());
                if r.object != entity {
                    names.insert(kb.entities[r.object].name.clone());
                }
                if visited.insert(r.object) {
                    next.push(r.object);
                }
            }
        }
        frontier = next;
    }
    names.into_iter().collect()
}
