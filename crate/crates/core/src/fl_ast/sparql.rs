//! SPARQL in the GrailQA shape:
//!
//! ```text
//! [PREFIX p: <iri>]*
//! SELECT (?x0 AS ?value) WHERE { SELECT DISTINCT ?x0 WHERE { body } }
//! ```
//!
//! where the body is a sequence of triple patterns, `VALUES` blocks and
//! `FILTER (...)` clauses. The bare `SELECT [DISTINCT] ?x WHERE { body }` and
//! `SELECT (COUNT(DISTINCT ?x) AS ?value)` wrappers are accepted too. Any
//! other construct is rejected.

use serde::{Deserialize, Serialize};

use super::bracket::BracketTree;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "text")]
pub enum Term {
    Var(String),
    /// Prefixed name or `<...>` IRI, as written.
    Iri(String),
    Literal(String),
}

impl Term {
    pub fn as_str(&self) -> &str {
        match self {
            Term::Var(s) | Term::Iri(s) | Term::Literal(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Triple(Triple),
    Values {
        var: String,
        values: Vec<String>,
    },
    /// Raw `FILTER ( ... )` text.
    Filter(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `SELECT [DISTINCT] ?x WHERE { body }`
    Bare { distinct: bool },
    /// `SELECT (?x AS ?alias) WHERE { SELECT DISTINCT ?x WHERE { body } }`
    Alias { alias: String },
    /// `SELECT (COUNT(DISTINCT ?x) AS ?alias) WHERE { SELECT DISTINCT ?x WHERE { body } }`
    Count { alias: String },
}

/// Role of an IRI inside the query, used when rewriting names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IriRole {
    Predicate,
    /// Object of `type.object.type`.
    Class,
    /// Non-class object or subject IRI.
    Entity,
    /// Member of a `VALUES` block.
    Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparqlQuery {
    pub prefixes: Vec<(String, String)>,
    pub projection: Projection,
    pub select_var: String,
    pub patterns: Vec<Pattern>,
    pub companion_sexpr: Option<BracketTree>,
}

impl SparqlQuery {
    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.patterns.iter().filter_map(|p| match p {
            Pattern::Triple(t) => Some(t),
            _ => None,
        })
    }

    pub fn filters(&self) -> impl Iterator<Item = &str> {
        self.patterns.iter().filter_map(|p| match p {
            Pattern::Filter(f) => Some(f.as_str()),
            _ => None,
        })
    }

    /// `VALUES` bindings as (variable, entity id) with the IRI prefix
    /// stripped, e.g. `("?x2", "m.010fcxr0")`.
    pub fn values_bindings(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for p in &self.patterns {
            if let Pattern::Values { var, values } = p {
                for v in values {
                    out.push((var.clone(), strip_iri(v).to_string()));
                }
            }
        }
        out
    }

    pub fn with_sexpr(mut self, sexpr: BracketTree) -> SparqlQuery {
        self.companion_sexpr = Some(sexpr);
        self
    }

    /// Rewrites IRIs by role; variables and literals are untouched.
    pub fn map_iris(&self, mut f: impl FnMut(IriRole, &str) -> String) -> SparqlQuery {
        let mut out = self.clone();
        for p in &mut out.patterns {
            match p {
                Pattern::Triple(t) => {
                    let is_type = matches!(&t.predicate, Term::Iri(i) if strip_iri(i) == "type.object.type");
                    if let Term::Iri(s) = &mut t.subject {
                        *s = f(IriRole::Entity, s);
                    }
                    if let Term::Iri(s) = &mut t.predicate {
                        *s = f(IriRole::Predicate, s);
                    }
                    if let Term::Iri(s) = &mut t.object {
                        let role = if is_type { IriRole::Class } else { IriRole::Entity };
                        *s = f(role, s);
                    }
                }
                Pattern::Values { values, .. } => {
                    for v in values {
                        *v = f(IriRole::Value, v);
                    }
                }
                Pattern::Filter(_) => {}
            }
        }
        out
    }

    /// Whitespace-neutral serialization used for exact-match comparison.
    pub fn canonical(&self) -> String {
        let mut body: Vec<String> = Vec::new();
        for p in &self.patterns {
            match p {
                Pattern::Triple(t) => body.push(format!(
                    "{} {} {} .",
                    t.subject.as_str(),
                    t.predicate.as_str(),
                    t.object.as_str()
                )),
                Pattern::Values { var, values } => body.push(format!("VALUES {} {{ {} }}", var, values.join(" "))),
                Pattern::Filter(f) => body.push(normalize_filter(f)),
            }
        }
        let body = body.join(" ");
        let inner = format!("SELECT DISTINCT {} WHERE {{ {} }}", self.select_var, body);
        let mut out = String::new();
        for (name, iri) in &self.prefixes {
            out.push_str(&format!("PREFIX {name}: <{iri}> "));
        }
        match &self.projection {
            Projection::Bare { distinct } => {
                let d = if *distinct { "DISTINCT " } else { "" };
                out.push_str(&format!("SELECT {d}{} WHERE {{ {} }}", self.select_var, body));
            }
            Projection::Alias { alias } => {
                out.push_str(&format!("SELECT ({} AS {alias}) WHERE {{ {inner} }}", self.select_var))
            }
            Projection::Count { alias } => out.push_str(&format!(
                "SELECT (COUNT(DISTINCT {}) AS {alias}) WHERE {{ {inner} }}",
                self.select_var
            )),
        }
        out
    }
}

/// Drops a leading `:` or `prefix:` from a prefixed name, or the angle
/// brackets of a full IRI.
pub fn strip_iri(iri: &str) -> &str {
    if let Some(inner) = iri.strip_prefix('<').and_then(|s| s.strip_suffix('>')) {
        return inner;
    }
    match iri.find(':') {
        Some(i) if iri[..i].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => &iri[i + 1..],
        _ => iri,
    }
}

fn normalize_filter(f: &str) -> String {
    f.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn peek_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let r = self.rest();
        r.len() >= kw.len()
            && r[..kw.len()].eq_ignore_ascii_case(kw)
            && !r[kw.len()..]
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unsupported(&format!("expected {kw}")))
        }
    }

    fn eat_char(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect_char(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_char(c) {
            Ok(())
        } else {
            Err(self.unsupported(&format!("expected '{c}'")))
        }
    }

    fn unsupported(&self, what: &str) -> ParseError {
        let snippet: String = self.rest().chars().take(30).collect();
        ParseError::UnsupportedSparql(format!("{what} at byte {}: {snippet:?}", self.pos))
    }

    fn read_var(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let r = self.rest();
        if !r.starts_with('?') {
            return Err(self.unsupported("expected variable"));
        }
        let len = 1 + r[1..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(r.len() - 1);
        if len == 1 {
            return Err(self.unsupported("empty variable name"));
        }
        self.pos += len;
        Ok(r[..len].to_string())
    }

    /// Reads one bare term. Returns the term and whether a trailing `.`
    /// terminator was glued to it.
    fn read_term(&mut self) -> Result<(Term, bool), ParseError> {
        self.skip_ws();
        let r = self.rest();
        let first = r.chars().next().ok_or_else(|| self.malformed("unexpected end"))?;
        if first == '?' {
            let v = self.read_var()?;
            let glued = self.rest().starts_with('.');
            if glued {
                self.pos += 1;
            }
            return Ok((Term::Var(v), glued));
        }
        if first == '<' {
            let end = r.find('>').ok_or_else(|| self.malformed("unterminated IRI"))?;
            self.pos += end + 1;
            return Ok((Term::Iri(r[..=end].to_string()), false));
        }
        if first == '"' {
            let close = r[1..].find('"').ok_or_else(|| self.malformed("unterminated literal"))? + 1;
            let mut end = close + 1;
            let tail = &r[end..];
            if tail.starts_with("^^") || tail.starts_with('@') {
                end += tail
                    .find(|c: char| c.is_whitespace() || c == '}' || c == ')')
                    .unwrap_or(tail.len());
            }
            self.pos += end;
            return Ok((Term::Literal(r[..end].to_string()), false));
        }
        if matches!(first, '{' | '}' | '(' | ')' | '.') {
            return Err(self.malformed(&format!("unexpected '{first}' in triple")));
        }
        let len = r
            .find(|c: char| c.is_whitespace() || matches!(c, '{' | '}' | '(' | ')'))
            .unwrap_or(r.len());
        let mut word = &r[..len];
        self.pos += len;
        let mut glued = false;
        if word.len() > 1 && word.ends_with('.') {
            word = &word[..word.len() - 1];
            glued = true;
        }
        let term = if word.contains(':') {
            Term::Iri(word.to_string())
        } else if word.parse::<f64>().is_ok() || word.eq_ignore_ascii_case("true") || word.eq_ignore_ascii_case("false")
        {
            Term::Literal(word.to_string())
        } else {
            return Err(self.malformed(&format!("unrecognized term {word:?}")));
        };
        Ok((term, glued))
    }

    fn malformed(&self, what: &str) -> ParseError {
        ParseError::MalformedTriple(format!("{what} at byte {}", self.pos))
    }

    fn read_balanced_parens(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0usize;
        for (i, c) in self.rest().char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth = depth.checked_sub(1).ok_or(ParseError::UnbalancedParens)?;
                    if depth == 0 {
                        self.pos += i + 1;
                        return Ok(&self.src[start..self.pos]);
                    }
                }
                _ if depth == 0 && !c.is_whitespace() => {
                    return Err(self.unsupported("expected '('"));
                }
                _ => {}
            }
        }
        Err(ParseError::UnbalancedParens)
    }
}

pub fn parse_sparql(text: &str) -> Result<SparqlQuery, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut c = Cursor { src: text, pos: 0 };
    let mut prefixes = Vec::new();
    while c.eat_keyword("PREFIX") {
        c.skip_ws();
        let colon = c.rest().find(':').ok_or_else(|| c.unsupported("malformed PREFIX"))?;
        let name = c.rest()[..colon].trim().to_string();
        c.pos += colon + 1;
        c.expect_char('<')?;
        let end = c.rest().find('>').ok_or_else(|| c.unsupported("unterminated IRI"))?;
        let iri = c.rest()[..end].to_string();
        c.pos += end + 1;
        prefixes.push((name, iri));
    }

    c.expect_keyword("SELECT")?;
    let (projection, select_var, patterns);
    if c.eat_char('(') {
        let counted = c.eat_keyword("COUNT");
        let var = if counted {
            c.expect_char('(')?;
            c.eat_keyword("DISTINCT");
            let v = c.read_var()?;
            c.expect_char(')')?;
            v
        } else {
            c.read_var()?
        };
        c.expect_keyword("AS")?;
        let alias = c.read_var()?;
        c.expect_char(')')?;
        c.expect_keyword("WHERE")?;
        c.expect_char('{')?;
        c.expect_keyword("SELECT")?;
        c.expect_keyword("DISTINCT")?;
        let inner_var = c.read_var()?;
        if inner_var != var {
            return Err(c.unsupported("outer projection does not match inner SELECT"));
        }
        c.expect_keyword("WHERE")?;
        c.expect_char('{')?;
        patterns = parse_body(&mut c)?;
        c.expect_char('}')?;
        projection = if counted {
            Projection::Count { alias }
        } else {
            Projection::Alias { alias }
        };
        select_var = var;
    } else {
        let distinct = c.eat_keyword("DISTINCT");
        select_var = c.read_var()?;
        c.expect_keyword("WHERE")?;
        c.expect_char('{')?;
        patterns = parse_body(&mut c)?;
        projection = Projection::Bare { distinct };
    }
    c.expect_char('}')?;
    if !c.at_end() {
        return Err(c.unsupported("trailing input"));
    }

    let query = SparqlQuery {
        prefixes,
        projection,
        select_var,
        patterns,
        companion_sexpr: None,
    };
    if query.triples().next().is_none() {
        return Err(ParseError::MalformedTriple("query has no triple patterns".into()));
    }
    let sel = Term::Var(query.select_var.clone());
    if !query.triples().any(|t| t.subject == sel || t.object == sel) {
        return Err(ParseError::MalformedTriple(format!(
            "selected variable {} is not bound by any triple",
            query.select_var
        )));
    }
    Ok(query)
}

fn parse_body(c: &mut Cursor<'_>) -> Result<Vec<Pattern>, ParseError> {
    let mut patterns = Vec::new();
    loop {
        match c.peek() {
            None => return Err(ParseError::UnbalancedBrackets),
            Some('}') => return Ok(patterns),
            Some('{') => return Err(c.unsupported("nested group")),
            Some('.') => {
                c.pos += 1;
            }
            _ if c.eat_keyword("VALUES") => {
                let var = c.read_var()?;
                c.expect_char('{')?;
                let end = c.rest().find('}').ok_or(ParseError::UnbalancedBrackets)?;
                let raw = &c.rest()[..end];
                c.pos += end + 1;
                patterns.push(Pattern::Values {
                    var,
                    values: split_values(raw),
                });
            }
            _ if c.peek_keyword("FILTER") => {
                let start = c.pos;
                c.eat_keyword("FILTER");
                c.read_balanced_parens()?;
                patterns.push(Pattern::Filter(c.src[start..c.pos].to_string()));
            }
            Some(ch)
                if ch.is_ascii_alphabetic()
                    && [
                        "OPTIONAL", "UNION", "MINUS", "BIND", "GRAPH", "SERVICE", "ORDER", "LIMIT", "GROUP",
                    ]
                    .iter()
                    .any(|k| c.peek_keyword(k)) =>
            {
                return Err(c.unsupported("unsupported construct"));
            }
            _ => {
                let (s, g1) = c.read_term()?;
                if g1 {
                    return Err(c.malformed("triple ends after subject"));
                }
                let (p, g2) = c.read_term()?;
                if g2 {
                    return Err(c.malformed("triple ends after predicate"));
                }
                if matches!(p, Term::Literal(_)) {
                    return Err(c.malformed("literal in predicate position"));
                }
                let (o, _) = c.read_term()?;
                patterns.push(Pattern::Triple(Triple {
                    subject: s,
                    predicate: p,
                    object: o,
                }));
            }
        }
    }
}

/// Splits a `VALUES` block. Entity names substituted for ids may contain
/// spaces (`:audio podcast`), so only tokens that open a new term start a
/// new value.
fn split_values(raw: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in raw.split_whitespace() {
        let starts_term = tok.starts_with(':') || tok.starts_with('<') || tok.starts_with('"') || tok.contains(':');
        match out.last_mut() {
            Some(last) if !starts_term => {
                last.push(' ');
                last.push_str(tok);
            }
            _ => out.push(tok.to_string()),
        }
    }
    out
}
