//! Demonstration retrieval over a seed set.
//!
//! Understanding prompts pick demos by skeleton edit distance plus a greedy
//! label cover. Generation prompts pick them by BM25 over masked questions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl_ast::{FormalProgram, Language};
use crate::skeleton::{mask_nlq, skeleton_of, NlqSkeleton, Skeleton, SkeletonError};

/// Bumped whenever the on-disk index layout changes.
pub const INDEX_CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("seed set is empty")]
    EmptySeedSet,
    #[error("seed set mixes languages {0} and {1}")]
    MixedLanguage(Language, Language),
    #[error("cannot compare a {0} skeleton with a {1} skeleton")]
    LanguageMismatch(Language, Language),
    #[error("index has no documents")]
    EmptyIndex,
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error("index cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedExample {
    pub id: String,
    pub question: String,
    pub program: FormalProgram,
    pub skeleton: Skeleton,
    pub nlq_skeleton: NlqSkeleton,
    pub answer: Option<String>,
}

impl SeedExample {
    /// Builds a seed, deriving both skeletons. `spans` are the surface
    /// mentions to mask in the question.
    pub fn new<S: AsRef<str>>(
        id: impl Into<String>,
        question: impl Into<String>,
        program: FormalProgram,
        spans: &[S],
        answer: Option<String>,
    ) -> Result<SeedExample, SkeletonError> {
        let question = question.into();
        let skeleton = skeleton_of(&program)?;
        let nlq_skeleton = mask_nlq(&question, spans);
        Ok(SeedExample {
            id: id.into(),
            question,
            program,
            skeleton,
            nlq_skeleton,
            answer,
        })
    }
}

/// Single-language seed collection, kept sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedSet {
    examples: Vec<SeedExample>,
}

impl SeedSet {
    pub fn new(mut examples: Vec<SeedExample>) -> Result<SeedSet, RetrievalError> {
        if let Some(first) = examples.first() {
            let lang = first.program.language();
            if let Some(other) = examples.iter().find(|e| e.program.language() != lang) {
                return Err(RetrievalError::MixedLanguage(lang, other.program.language()));
            }
        }
        examples.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(SeedSet { examples })
    }

    pub fn examples(&self) -> &[SeedExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn language(&self) -> Option<Language> {
        self.examples.first().map(|e| e.program.language())
    }

    pub fn get(&self, id: &str) -> Option<&SeedExample> {
        self.examples
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.examples[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonIndex {
    pub language: Language,
    /// Skeleton text to member ids, ids ascending.
    pub groups: BTreeMap<String, Vec<String>>,
    skeletons: BTreeMap<String, Skeleton>,
}

impl SkeletonIndex {
    pub fn skeleton(&self, key: &str) -> Option<&Skeleton> {
        self.skeletons.get(key)
    }

    pub fn group_size(&self, key: &str) -> usize {
        self.groups.get(key).map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

pub fn build_skeleton_index(seeds: &SeedSet) -> Result<SkeletonIndex, RetrievalError> {
    let language = seeds.language().ok_or(RetrievalError::EmptySeedSet)?;
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut skeletons = BTreeMap::new();
    for e in seeds.examples() {
        groups.entry(e.skeleton.text.clone()).or_default().push(e.id.clone());
        skeletons
            .entry(e.skeleton.text.clone())
            .or_insert_with(|| e.skeleton.clone());
    }
    Ok(SkeletonIndex {
        language,
        groups,
        skeletons,
    })
}

/// Token-level Levenshtein distance between two skeletons.
pub fn skeleton_edit_distance(a: &Skeleton, b: &Skeleton) -> Result<usize, RetrievalError> {
    if a.language != b.language {
        return Err(RetrievalError::LanguageMismatch(a.language, b.language));
    }
    Ok(token_distance(&a.tokens, &b.tokens))
}

/// Levenshtein distance over token sequences, unit costs.
pub fn token_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// Index keys ordered by distance to `target`, then larger group, then key.
pub fn rank_skeletons(target: &Skeleton, index: &SkeletonIndex) -> Vec<(String, usize)> {
    let mut ranked: Vec<(String, usize)> = index
        .skeletons
        .iter()
        .map(|(k, s)| (k.clone(), token_distance(&target.tokens, &s.tokens)))
        .collect();
    ranked.sort_by(|(ka, da), (kb, db)| {
        da.cmp(db)
            .then(index.group_size(kb).cmp(&index.group_size(ka)))
            .then(ka.cmp(kb))
    });
    ranked
}

/// A skeleton key offered to the greedy cover step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverCandidate {
    pub key: String,
    pub labels: BTreeSet<String>,
    pub distance: usize,
}

/// One greedy pick: the key and how many still-uncovered labels it covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverStep {
    pub key: String,
    pub gain: usize,
}

/// Greedy max-cover state: the target labels not yet covered.
#[derive(Debug, Clone)]
pub struct GreedyCover {
    pub remaining: BTreeSet<String>,
}

impl GreedyCover {
    pub fn new(target_labels: &BTreeSet<String>) -> GreedyCover {
        GreedyCover {
            remaining: target_labels.clone(),
        }
    }

    /// Picks up to `k` keys from `pool`, each time taking the candidate that
    /// covers the most remaining labels (ties: smaller distance, then key).
    pub fn select(&mut self, pool: &[CoverCandidate], k: usize) -> Vec<CoverStep> {
        let mut open: Vec<&CoverCandidate> = pool.iter().collect();
        let mut steps = Vec::new();
        while steps.len() < k && !open.is_empty() {
            let gain = |c: &CoverCandidate| c.labels.intersection(&self.remaining).count();
            let best = (0..open.len())
                .min_by(|&i, &j| {
                    let (a, b) = (open[i], open[j]);
                    gain(b)
                        .cmp(&gain(a))
                        .then(a.distance.cmp(&b.distance))
                        .then(a.key.cmp(&b.key))
                })
                .expect("pool is non-empty");
            let pick = open.remove(best);
            let g = gain(pick);
            for l in &pick.labels {
                self.remaining.remove(l);
            }
            steps.push(CoverStep {
                key: pick.key.clone(),
                gain: g,
            });
        }
        steps
    }
}

/// Greedy cover across distance tiers: the nearest tier is exhausted before
/// the next one is consulted. Uncovered labels carry across tiers.
pub fn greedy_cover_select(
    target_labels: &BTreeSet<String>,
    tiers: &[Vec<CoverCandidate>],
    k: usize,
) -> Vec<CoverStep> {
    let mut cover = GreedyCover::new(target_labels);
    let mut steps = Vec::new();
    for tier in tiers {
        if steps.len() >= k {
            break;
        }
        steps.extend(cover.select(tier, k - steps.len()));
    }
    steps
}

/// Groups a ranking into equal-distance tiers of cover candidates.
pub fn distance_tiers(ranked: &[(String, usize)], index: &SkeletonIndex) -> Vec<Vec<CoverCandidate>> {
    let mut tiers: Vec<Vec<CoverCandidate>> = Vec::new();
    let mut last = None;
    for (key, d) in ranked {
        if last != Some(*d) {
            tiers.push(Vec::new());
            last = Some(*d);
        }
        let labels = index.skeleton(key).map(|s| s.labels.clone()).unwrap_or_default();
        tiers.last_mut().expect("tier pushed").push(CoverCandidate {
            key: key.clone(),
            labels,
            distance: *d,
        });
    }
    tiers
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Put the most similar demo last, next to the target.
    pub most_similar_last: bool,
    /// Seed id never returned (the target's own id when seeds and targets
    /// share a pool).
    pub exclude_id: Option<String>,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            most_similar_last: true,
            exclude_id: None,
        }
    }
}

/// Selects up to `k` demos for an understanding prompt, in prompt order.
///
/// Tiers are visited nearest first. Within a tier the greedy cover picks the
/// keys, then members of the chosen groups are drawn round-robin (smallest id
/// first) until `k` demos exist or the groups are exhausted. Only then does
/// the next tier contribute. No seed is used twice.
pub fn select_lf_demos<'a>(
    target: &FormalProgram,
    seeds: &'a SeedSet,
    index: &SkeletonIndex,
    k: usize,
    opts: &SelectOptions,
) -> Result<Vec<&'a SeedExample>, RetrievalError> {
    if seeds.is_empty() || index.is_empty() {
        return Err(RetrievalError::EmptySeedSet);
    }
    let target_sk = skeleton_of(target)?;
    if target_sk.language != index.language {
        return Err(RetrievalError::LanguageMismatch(target_sk.language, index.language));
    }
    let ranked = rank_skeletons(&target_sk, index);
    let tiers = distance_tiers(&ranked, index);
    let mut cover = GreedyCover::new(&target_sk.labels);
    let mut picked: Vec<&'a SeedExample> = Vec::new();
    let usable = |id: &String| opts.exclude_id.as_ref() != Some(id);

    for tier in &tiers {
        if picked.len() >= k {
            break;
        }
        let pool: Vec<CoverCandidate> = tier
            .iter()
            .filter(|c| index.groups[&c.key].iter().any(usable))
            .cloned()
            .collect();
        let steps = cover.select(&pool, k - picked.len());
        let members: Vec<Vec<&String>> = steps
            .iter()
            .map(|s| index.groups[&s.key].iter().filter(|id| usable(id)).collect())
            .collect();
        let mut round = 0;
        while picked.len() < k && members.iter().any(|m| round < m.len()) {
            for m in &members {
                if picked.len() >= k {
                    break;
                }
                if let Some(id) = m.get(round) {
                    picked.push(seeds.get(id).expect("index built from this seed set"));
                }
            }
            round += 1;
        }
    }
    if opts.most_similar_last {
        picked.reverse();
    }
    Ok(picked)
}

/// Lowercase alphanumeric runs; `[E3]`-style placeholders stay whole.
pub fn tokenize_nlq(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '[' {
            let mut j = i + 1;
            if j < chars.len() && chars[j].is_ascii_uppercase() {
                j += 1;
                let digits = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j > digits && j < chars.len() && chars[j] == ']' {
                    out.push(chars[i..=j].iter().collect());
                    i = j + 1;
                    continue;
                }
            }
            i += 1;
        } else if chars[i].is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
        } else {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Okapi BM25 over pre-tokenized documents, with the non-negative
/// `ln(1 + (N - df + 0.5) / (df + 0.5))` idf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub version: u32,
    pub params: Bm25Params,
    pub doc_ids: Vec<String>,
    pub doc_lengths: Vec<usize>,
    pub avgdl: f64,
    /// Term to (doc position, term frequency), positions ascending.
    pub postings: BTreeMap<String, Vec<(usize, u32)>>,
}

impl Bm25Index {
    pub fn build(docs: Vec<(String, Vec<String>)>, params: Bm25Params) -> Result<Bm25Index, RetrievalError> {
        if docs.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (pos, (id, tokens)) in docs.into_iter().enumerate() {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((pos, n));
            }
            doc_ids.push(id);
            doc_lengths.push(tokens.len());
        }
        let avgdl = doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64;
        Ok(Bm25Index {
            version: INDEX_CACHE_VERSION,
            params,
            doc_ids,
            doc_lengths,
            avgdl,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Score of every document, by position. Repeated query terms count
    /// once per occurrence.
    pub fn scores<S: AsRef<str>>(&self, query: &[S]) -> Vec<f64> {
        let mut scores = vec![0.0; self.len()];
        let Bm25Params { k1, b } = self.params;
        for term in query {
            let Some(list) = self.postings.get(term.as_ref()) else {
                continue;
            };
            let idf = self.idf(term.as_ref());
            for &(pos, tf) in list {
                let tf = tf as f64;
                let norm = 1.0 - b + b * self.doc_lengths[pos] as f64 / self.avgdl.max(f64::MIN_POSITIVE);
                scores[pos] += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
            }
        }
        scores
    }

    /// Top `top_n` documents as (position, score), score descending, ties
    /// by doc id.
    pub fn query<S: AsRef<str>>(&self, query: &[S], top_n: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self.scores(query).into_iter().enumerate().collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0].cmp(&self.doc_ids[b.0]))
        });
        ranked.truncate(top_n);
        ranked
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let json = serde_json::to_string(self).map_err(|e| RetrievalError::Cache(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| RetrievalError::Cache(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Bm25Index, RetrievalError> {
        let text = std::fs::read_to_string(path).map_err(|e| RetrievalError::Cache(e.to_string()))?;
        let idx: Bm25Index = serde_json::from_str(&text).map_err(|e| RetrievalError::Cache(e.to_string()))?;
        if idx.version != INDEX_CACHE_VERSION {
            return Err(RetrievalError::Cache(format!(
                "version {} does not match {}",
                idx.version, INDEX_CACHE_VERSION
            )));
        }
        Ok(idx)
    }
}

/// BM25 index over the masked questions of a seed set.
pub fn build_bm25_index(seeds: &SeedSet) -> Result<Bm25Index, RetrievalError> {
    if seeds.is_empty() {
        return Err(RetrievalError::EmptySeedSet);
    }
    let docs = seeds
        .examples()
        .iter()
        .map(|e| (e.id.clone(), tokenize_nlq(&e.nlq_skeleton.text)))
        .collect();
    Bm25Index::build(docs, Bm25Params::default())
}

/// Ranked (seed id, score) for a masked question.
pub fn bm25_query(index: &Bm25Index, query: &NlqSkeleton, top_n: usize) -> Result<Vec<(String, f64)>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    Ok(index
        .query(&tokenize_nlq(&query.text), top_n)
        .into_iter()
        .map(|(pos, s)| (index.doc_ids[pos].clone(), s))
        .collect())
}

/// Selects up to `k` demos for a generation prompt, in prompt order.
pub fn select_nlq_demos<'a, S: AsRef<str>>(
    target_question: &str,
    gold_spans: &[S],
    seeds: &'a SeedSet,
    index: &Bm25Index,
    k: usize,
    opts: &SelectOptions,
) -> Result<Vec<&'a SeedExample>, RetrievalError> {
    if seeds.is_empty() {
        return Err(RetrievalError::EmptySeedSet);
    }
    let masked = mask_nlq(target_question, gold_spans);
    let mut seen = HashSet::new();
    let mut picked: Vec<&'a SeedExample> = bm25_query(index, &masked, index.len())?
        .into_iter()
        .filter(|(id, _)| opts.exclude_id.as_ref() != Some(id))
        .filter_map(|(id, _)| seeds.get(&id))
        .filter(|e| seen.insert(e.id.clone()))
        .take(k)
        .collect();
    if opts.most_similar_last {
        picked.reverse();
    }
    Ok(picked)
}
