//! Typed ASTs for the three formal languages and their textual forms.

pub mod bracket;
pub mod kopl;
pub mod sparql;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bracket::{parse_bracket, serialize_bracket, BracketStyle, BracketTree, LeafKind};
pub use kopl::{parse_kopl, serialize_kopl, KoplFormat, KoplFunction, KoplOp, KoplProgram};
pub use sparql::{parse_sparql, SparqlQuery};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty input")]
    Empty,
    #[error("unknown KoPL function {0:?}")]
    UnknownFunction(String),
    #[error("{function} at position {position} needs {needed} subtrees, only {available} available")]
    ArityUnderflow {
        function: String,
        position: usize,
        needed: usize,
        available: usize,
    },
    #[error("program leaves {0} unconnected subtrees")]
    DanglingSubtrees(usize),
    #[error("invalid dependencies at function {position}: {reason}")]
    InvalidDependencies { position: usize, reason: String },
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("unbalanced brackets")]
    UnbalancedBrackets,
    #[error("unsupported SPARQL: {0}")]
    UnsupportedSparql(String),
    #[error("malformed triple: {0}")]
    MalformedTriple(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Kopl,
    Sparql,
    LambdaDcs,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::Kopl, Language::Sparql, Language::LambdaDcs];

    /// Name used inside prompt instructions.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Language::Kopl => "kopl",
            Language::Sparql => "sparql",
            Language::LambdaDcs => "lambdaDCS",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Kopl => "kopl",
            Language::Sparql => "sparql",
            Language::LambdaDcs => "lambda_dcs",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kopl" => Ok(Language::Kopl),
            "sparql" => Ok(Language::Sparql),
            "lambda_dcs" | "lambdadcs" | "lambda-dcs" => Ok(Language::LambdaDcs),
            other => Err(format!("unknown language {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "language", content = "ast")]
pub enum ProgramBody {
    Kopl(KoplProgram),
    Sparql(SparqlQuery),
    LambdaDcs(BracketTree),
}

/// A parsed logical form together with the text it came from. The language
/// is carried by the body variant, so the two cannot disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalProgram {
    pub body: ProgramBody,
    pub source_text: String,
}

impl FormalProgram {
    pub fn parse(language: Language, text: &str) -> Result<FormalProgram, ParseError> {
        let body = match language {
            Language::Kopl => ProgramBody::Kopl(parse_kopl(text)?),
            Language::Sparql => ProgramBody::Sparql(parse_sparql(text)?),
            Language::LambdaDcs => ProgramBody::LambdaDcs(parse_bracket(text)?),
        };
        Ok(FormalProgram {
            body,
            source_text: text.to_string(),
        })
    }

    /// Parses a SPARQL query together with its S-expression.
    pub fn parse_sparql_with_sexpr(text: &str, sexpr: &str) -> Result<FormalProgram, ParseError> {
        let q = parse_sparql(text)?.with_sexpr(parse_bracket(sexpr)?);
        Ok(FormalProgram {
            body: ProgramBody::Sparql(q),
            source_text: text.to_string(),
        })
    }

    pub fn from_kopl(program: KoplProgram) -> FormalProgram {
        let source_text = program.serialize(KoplFormat::DotChain);
        FormalProgram {
            body: ProgramBody::Kopl(program),
            source_text,
        }
    }

    pub fn language(&self) -> Language {
        match self.body {
            ProgramBody::Kopl(_) => Language::Kopl,
            ProgramBody::Sparql(_) => Language::Sparql,
            ProgramBody::LambdaDcs(_) => Language::LambdaDcs,
        }
    }

    pub fn as_kopl(&self) -> Option<&KoplProgram> {
        match &self.body {
            ProgramBody::Kopl(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_sparql(&self) -> Option<&SparqlQuery> {
        match &self.body {
            ProgramBody::Sparql(q) => Some(q),
            _ => None,
        }
    }

    /// Format-neutral serialization: dot-chain KoPL, canonical SPARQL,
    /// spaced Lambda DCS.
    pub fn canonical(&self) -> String {
        match &self.body {
            ProgramBody::Kopl(p) => p.serialize(KoplFormat::DotChain),
            ProgramBody::Sparql(q) => q.canonical(),
            ProgramBody::LambdaDcs(t) => t.serialize(BracketStyle::Spaced),
        }
    }

    /// The text placed in understanding prompts.
    pub fn understanding_text(&self) -> String {
        match &self.body {
            ProgramBody::Kopl(p) => p.serialize(KoplFormat::Compact),
            _ => self.source_text.clone(),
        }
    }

    /// The text placed in generation prompts.
    pub fn generation_text(&self) -> String {
        match &self.body {
            ProgramBody::Kopl(p) => p.serialize(KoplFormat::Tagged),
            _ => self.source_text.clone(),
        }
    }
}

/// Collapses runs of whitespace to one space and trims.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn language_tags() {
        for l in Language::ALL {
            assert_eq!(l.as_str().parse::<Language>().unwrap(), l);
        }
        assert_eq!(Language::LambdaDcs.prompt_name(), "lambdaDCS");
        assert!("prolog".parse::<Language>().is_err());
    }

    #[test]
    fn body_matches_language() {
        let p = FormalProgram::parse(Language::Kopl, "FindAll().Count()").unwrap();
        assert_eq!(p.language(), Language::Kopl);
        assert_eq!(p.understanding_text(), "FindAll()Count()");
        assert_eq!(p.generation_text(), "FindAll [func] Count");
        let l = FormalProgram::parse(Language::LambdaDcs, "(call  SW.domain (string player))").unwrap();
        assert_eq!(l.language(), Language::LambdaDcs);
        assert_eq!(l.canonical(), "( call SW.domain ( string player ) )");
    }

    #[test]
    fn whitespace_normalization() {
        assert_eq!(normalize_ws("  a \n b\t\tc "), "a b c");
    }

    #[test]
    fn program_serde_round_trip() {
        let p = FormalProgram::parse(Language::Kopl, "Find(A).Find(B).And().What()").unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: FormalProgram = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
