//! Dataset ingestion into canonical records, and the native row shapes used
//! when writing pseudo-datasets back out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::fl_ast::{FormalProgram, KoplFormat, KoplFunction, KoplOp, KoplProgram, Language, ParseError};
use crate::retrieval::SeedExample;
use crate::skeleton::lf_mention_spans;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    KqaPro,
    Grailqa,
    Overnight,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Option<DatasetKind> {
        match s {
            "kqa_pro" | "kqapro" => Some(DatasetKind::KqaPro),
            "grailqa" => Some(DatasetKind::Grailqa),
            "overnight" => Some(DatasetKind::Overnight),
            _ => None,
        }
    }

    pub fn language(self) -> Language {
        match self {
            DatasetKind::KqaPro => Language::Kopl,
            DatasetKind::Grailqa => Language::Sparql,
            DatasetKind::Overnight => Language::LambdaDcs,
        }
    }

    pub fn for_language(language: Language) -> DatasetKind {
        match language {
            Language::Kopl => DatasetKind::KqaPro,
            Language::Sparql => DatasetKind::Grailqa,
            Language::LambdaDcs => DatasetKind::Overnight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LfField {
    pub language: Language,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sexpr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tagged: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kb_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub id: String,
    pub question: String,
    pub lf: LfField,
    #[serde(default)]
    pub entities: Vec<EntityMention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    /// Dataset-provided question type, passed through for grouping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
}

impl CanonicalRecord {
    pub fn program(&self) -> Result<FormalProgram, ParseError> {
        match (&self.lf.language, &self.lf.sexpr) {
            (Language::Sparql, Some(sexpr)) => FormalProgram::parse_sparql_with_sexpr(&self.lf.text, sexpr),
            (lang, _) => FormalProgram::parse(*lang, &self.lf.text),
        }
    }

    /// Surface mentions to mask in the question.
    pub fn spans(&self) -> Vec<String> {
        self.entities.iter().map(|e| e.name.clone()).collect()
    }

    pub fn to_seed(&self) -> Result<SeedExample, HarnessError> {
        Ok(SeedExample::new(
            self.id.clone(),
            self.question.clone(),
            self.program()?,
            &self.spans(),
            self.answer.clone(),
        )?)
    }

    /// The logical form as it appears on the output side of a generation
    /// prompt.
    pub fn generation_text(&self) -> String {
        self.lf.tagged.clone().unwrap_or_else(|| self.lf.text.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: Vec<CanonicalRecord>,
    pub skipped: Vec<Skipped>,
}

pub fn ingest(kind: DatasetKind, path: &Path) -> Result<IngestReport, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    ingest_str(kind, &text)
}

/// Ingests file contents. Accepts a JSON array or JSON lines; Overnight also
/// accepts `utterance<TAB>logical form` lines.
pub fn ingest_str(kind: DatasetKind, text: &str) -> Result<IngestReport, HarnessError> {
    let trimmed = text.trim_start();
    let raw: Vec<Json> = if trimmed.is_empty() {
        Vec::new()
    } else if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| HarnessError::Json(e.to_string()))?
    } else if trimmed.starts_with('{') {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| HarnessError::Json(format!("line {}: {e}", i + 1))))
            .collect::<Result<_, _>>()?
    } else if kind == DatasetKind::Overnight {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (u, lf) = l.split_once('\t').unwrap_or((l, ""));
                json!({"utterance": u, "logical_form": lf})
            })
            .collect()
    } else {
        return Err(HarnessError::Json("expected a JSON array or JSON lines".into()));
    };

    let mut report = IngestReport::default();
    for (index, item) in raw.iter().enumerate() {
        let converted = match kind {
            DatasetKind::KqaPro => kqa_record(index, item),
            DatasetKind::Grailqa => grail_record(index, item),
            DatasetKind::Overnight => overnight_record(index, item),
        };
        match converted {
            Ok(r) => report.records.push(r),
            Err(reason) => {
                log::warn!("skipping record {index}: {reason}");
                report.skipped.push(Skipped { index, reason });
            }
        }
    }
    Ok(report)
}

fn str_field<'a>(item: &'a Json, keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| item.get(*k).and_then(Json::as_str))
}

fn id_of(item: &Json, keys: &[&str], index: usize) -> String {
    keys.iter()
        .find_map(|k| match item.get(*k) {
            Some(Json::String(s)) => Some(s.clone()),
            Some(Json::Number(n)) => Some(n.to_string()),
            _ => None,
        })
        .unwrap_or_else(|| format!("{index:06}"))
}

fn names_only(spans: Vec<String>) -> Vec<EntityMention> {
    spans
        .into_iter()
        .map(|name| EntityMention { name, kb_id: None })
        .collect()
}

fn kqa_record(index: usize, item: &Json) -> Result<CanonicalRecord, String> {
    #[derive(Deserialize)]
    struct RawFunction {
        function: String,
        #[serde(default)]
        dependencies: Vec<usize>,
        #[serde(default)]
        inputs: Vec<String>,
    }
    let question = str_field(item, &["question"]).ok_or("missing question")?;
    let raw: Vec<RawFunction> = serde_json::from_value(item.get("program").cloned().ok_or("missing program")?)
        .map_err(|e| format!("program: {e}"))?;
    let functions = raw
        .into_iter()
        .map(|f| {
            let op = KoplOp::from_name(&f.function).ok_or_else(|| format!("unknown function {:?}", f.function))?;
            Ok(KoplFunction {
                op,
                args: f.inputs,
                deps: f.dependencies,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let program = KoplProgram::from_functions(functions).map_err(|e| e.to_string())?;
    let formal = FormalProgram::from_kopl(program.clone());
    Ok(CanonicalRecord {
        id: id_of(item, &["id"], index),
        question: question.to_string(),
        lf: LfField {
            language: Language::Kopl,
            text: program.serialize(KoplFormat::DotChain),
            sexpr: None,
            tagged: Some(program.serialize(KoplFormat::Tagged)),
        },
        entities: names_only(lf_mention_spans(&formal)),
        answer: str_field(item, &["answer"]).map(str::to_string),
        qtype: str_field(item, &["type", "qtype"]).map(str::to_string),
    })
}

fn grail_record(index: usize, item: &Json) -> Result<CanonicalRecord, String> {
    let question = str_field(item, &["question"]).ok_or("missing question")?;
    let sparql = str_field(item, &["sparql_query", "sparql"]).ok_or("missing sparql_query")?;
    let sexpr = str_field(item, &["s_expression"]).ok_or("missing s_expression")?;
    let program = FormalProgram::parse_sparql_with_sexpr(sparql, sexpr).map_err(|e| e.to_string())?;
    let mut entities: Vec<EntityMention> = item
        .pointer("/graph_query/nodes")
        .and_then(Json::as_array)
        .map(|nodes| {
            nodes
                .iter()
                .filter(|n| matches!(n.get("node_type").and_then(Json::as_str), Some("entity" | "literal")))
                .filter_map(|n| {
                    let id = n.get("id").and_then(Json::as_str)?;
                    let entity = n.get("node_type").and_then(Json::as_str) == Some("entity");
                    let name = if entity {
                        n.get("friendly_name").and_then(Json::as_str).unwrap_or(id)
                    } else {
                        id.split("^^").next().unwrap_or(id)
                    };
                    Some(EntityMention {
                        name: name.to_string(),
                        kb_id: entity.then(|| id.to_string()),
                    })
                })
                .collect()
        })
        .unwrap_or_default();
    if entities.is_empty() {
        entities = names_only(lf_mention_spans(&program));
    }
    let answer = item.get("answer").and_then(Json::as_array).map(|a| {
        a.iter()
            .filter_map(|x| str_field(x, &["entity_name", "answer_argument"]))
            .collect::<Vec<_>>()
            .join("; ")
    });
    Ok(CanonicalRecord {
        id: id_of(item, &["qid", "id"], index),
        question: question.to_string(),
        lf: LfField {
            language: Language::Sparql,
            text: sparql.to_string(),
            sexpr: Some(sexpr.to_string()),
            tagged: None,
        },
        entities,
        answer: answer.filter(|a| !a.is_empty()),
        qtype: str_field(item, &["function", "level"]).map(str::to_string),
    })
}

fn overnight_record(index: usize, item: &Json) -> Result<CanonicalRecord, String> {
    let question = str_field(item, &["utterance", "question"]).ok_or("missing utterance")?;
    let lf = str_field(item, &["logical_form", "lf", "formula"]).ok_or("missing logical_form")?;
    let program = FormalProgram::parse(Language::LambdaDcs, lf).map_err(|e| e.to_string())?;
    Ok(CanonicalRecord {
        id: id_of(item, &["id"], index),
        question: question.to_string(),
        lf: LfField {
            language: Language::LambdaDcs,
            text: lf.to_string(),
            sexpr: None,
            tagged: None,
        },
        entities: names_only(lf_mention_spans(&program)),
        answer: None,
        qtype: str_field(item, &["domain"]).map(str::to_string),
    })
}

/// One pseudo-dataset row in the dataset's own layout. `question` is the
/// model's question, or `None` for a failed row, which is flagged.
pub fn native_row(kind: DatasetKind, record: &CanonicalRecord, question: Option<&str>, failure: Option<&str>) -> Json {
    let q = question.unwrap_or("");
    let mut row = match kind {
        DatasetKind::KqaPro => {
            let program: Vec<Json> = record
                .program()
                .ok()
                .and_then(|p| p.as_kopl().cloned())
                .map(|p| {
                    p.functions()
                        .iter()
                        .map(|f| json!({"function": f.name(), "dependencies": f.deps, "inputs": f.args}))
                        .collect()
                })
                .unwrap_or_default();
            json!({"id": record.id, "question": q, "program": program, "answer": record.answer})
        }
        DatasetKind::Grailqa => json!({
            "qid": record.id,
            "question": q,
            "sparql_query": record.lf.text,
            "s_expression": record.lf.sexpr,
        }),
        DatasetKind::Overnight => json!({"id": record.id, "utterance": q, "logical_form": record.lf.text}),
    };
    if let Some(reason) = failure {
        row["failed"] = Json::String(reason.to_string());
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    const KQA: &str = r#"[{"question": "How many films are there?",
        "program": [{"function": "FindAll", "dependencies": [], "inputs": []},
                    {"function": "FilterConcept", "dependencies": [0], "inputs": ["film"]},
                    {"function": "Count", "dependencies": [1], "inputs": []}],
        "answer": "3"},
        {"question": "broken", "program": [{"function": "Nope", "dependencies": [], "inputs": []}]}]"#;

    #[test]
    fn kqa_records_and_skips() {
        let r = ingest_str(DatasetKind::KqaPro, KQA).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.skipped.len(), 1);
        let rec = &r.records[0];
        assert_eq!(rec.lf.text, "FindAll().FilterConcept(film).Count()");
        assert_eq!(
            rec.lf.tagged.as_deref(),
            Some("FindAll [func] FilterConcept [arg] film [func] Count")
        );
        assert_eq!(rec.spans(), vec!["film"]);
        assert_eq!(rec.id, "000000");
        let row = native_row(DatasetKind::KqaPro, rec, Some("q"), None);
        assert_eq!(row["program"][1]["dependencies"][0], 0);
    }

    #[test]
    fn empty_input() {
        let r = ingest_str(DatasetKind::Grailqa, "  \n").unwrap();
        assert!(r.records.is_empty() && r.skipped.is_empty());
    }

    #[test]
    fn overnight_tsv() {
        let r = ingest_str(
            DatasetKind::Overnight,
            "player with 3 steals\t( call SW.listValue ( string steals ) )\n",
        )
        .unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].lf.language, Language::LambdaDcs);
    }
}
