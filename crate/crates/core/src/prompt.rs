//! Prompt assembly for the understanding, generation and zero-shot tasks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl_ast::Language;

pub const SEPARATOR: &str = " [SEP] ";

/// Fixed zero-shot preamble: the KoPL function list and five examples.
pub const ZERO_SHOT_PREAMBLE: &str = include_str!("../resources/zero_shot_kopl.txt");
pub const ZERO_SHOT_LEAD: &str = "Tell me the answer, ";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("zero-shot prompts exist only for KoPL, got {0}")]
    ZeroShotLanguage(Language),
    #[error("template file: {0}")]
    Template(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Understanding,
    Generation,
    ZeroShotUnderstanding,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Understanding => "understanding",
            Task::Generation => "generation",
            Task::ZeroShotUnderstanding => "zero_shot_understanding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub task: Task,
    pub language: Language,
    pub text: String,
    pub demo_count: usize,
}

/// Wording of one prompt kind. `{language}` in the instruction is replaced
/// by the language's prompt name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
    /// Joins an input to its output, trailing space included.
    pub connective: String,
}

impl PromptTemplate {
    pub fn understanding() -> PromptTemplate {
        PromptTemplate {
            instruction: "According to the given logic form {language}, generate the corresponding natural language question. For examples, ".into(),
            connective: " is verbalized as: ".into(),
        }
    }

    pub fn generation() -> PromptTemplate {
        PromptTemplate {
            instruction: "According to the given natural language question, generate the corresponding logic form in {language}. ".into(),
            connective: " is parsed into: ".into(),
        }
    }
}

/// Where the knowledge block goes relative to the instruction sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KbPlacement {
    #[default]
    BeforeInstruction,
    AfterInstruction,
}

/// Template overrides keyed by `task` or `task:language`; the more specific
/// key wins. Also carries the knowledge-block wording.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    #[serde(default)]
    pub templates: BTreeMap<String, PromptTemplate>,
    /// Knowledge-block wording; `{names}` is replaced by the name list.
    #[serde(default)]
    pub kb_context: Option<String>,
    #[serde(default)]
    pub kb_placement: KbPlacement,
}

pub const DEFAULT_KB_CONTEXT: &str = "Related knowledge: {names}";

impl PromptTemplates {
    pub fn load(path: &Path) -> Result<PromptTemplates, PromptError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PromptError::Template(e.to_string()))
    }

    pub fn template(&self, task: Task, language: Language) -> PromptTemplate {
        let specific = format!("{}:{}", task.as_str(), language.as_str());
        if let Some(t) = self
            .templates
            .get(&specific)
            .or_else(|| self.templates.get(task.as_str()))
        {
            return t.clone();
        }
        match task {
            Task::Generation => PromptTemplate::generation(),
            _ => PromptTemplate::understanding(),
        }
    }

    pub fn kb_block(&self, names: &[String]) -> String {
        kb_context_block_with(self.kb_context.as_deref().unwrap_or(DEFAULT_KB_CONTEXT), names)
    }

    pub fn understanding(&self, target_lf: &str, demos: &[(String, String)], language: Language) -> Prompt {
        let t = self.template(Task::Understanding, language);
        assemble(Task::Understanding, language, &t, target_lf, demos)
    }

    /// Generation prompt; a non-empty `kb_block` is placed per
    /// `kb_placement`, separated by a newline.
    pub fn generation(
        &self,
        target_question: &str,
        demos: &[(String, String)],
        language: Language,
        kb_block: &str,
    ) -> Prompt {
        let t = self.template(Task::Generation, language);
        assemble(Task::Generation, language, &t, target_question, demos).with_kb(
            kb_block,
            self.kb_placement,
            &t,
            language,
        )
    }
}

impl Prompt {
    fn with_kb(mut self, block: &str, placement: KbPlacement, t: &PromptTemplate, language: Language) -> Prompt {
        if block.is_empty() {
            return self;
        }
        match placement {
            KbPlacement::BeforeInstruction => self.text = format!("{block}\n{}", self.text),
            KbPlacement::AfterInstruction => {
                let head = instruction_text(t, language);
                let tail = self.text[head.len()..].to_string();
                self.text = format!("{head}{block}\n{tail}");
            }
        }
        self
    }
}

fn instruction_text(t: &PromptTemplate, language: Language) -> String {
    t.instruction.replace("{language}", language.prompt_name())
}

fn assemble(task: Task, language: Language, t: &PromptTemplate, target: &str, demos: &[(String, String)]) -> Prompt {
    let mut text = instruction_text(t, language);
    for (input, output) in demos {
        text.push_str(input);
        text.push_str(&t.connective);
        text.push_str(output);
        text.push_str(SEPARATOR);
    }
    text.push_str(target);
    text.push_str(&t.connective);
    Prompt {
        task,
        language,
        text,
        demo_count: demos.len(),
    }
}

/// Demos are (logical form text, question) pairs in prompt order.
pub fn build_understanding_prompt(target_lf: &str, demos: &[(String, String)], language: Language) -> Prompt {
    PromptTemplates::default().understanding(target_lf, demos, language)
}

/// Demos are (question, logical form text) pairs in prompt order; KoPL
/// forms should be in tagged format.
pub fn build_generation_prompt(target_question: &str, demos: &[(String, String)], language: Language) -> Prompt {
    PromptTemplates::default().generation(target_question, demos, language, "")
}

pub fn build_zero_shot_prompt(target_lf: &str, language: Language) -> Result<Prompt, PromptError> {
    if language != Language::Kopl {
        return Err(PromptError::ZeroShotLanguage(language));
    }
    Ok(Prompt {
        task: Task::ZeroShotUnderstanding,
        language,
        text: format!("{ZERO_SHOT_PREAMBLE}{ZERO_SHOT_LEAD}{target_lf}"),
        demo_count: 0,
    })
}

/// `Related knowledge: a, b` over the deduplicated, sorted names; empty
/// when there are no names.
pub fn kb_context_block(names: &[String]) -> String {
    kb_context_block_with(DEFAULT_KB_CONTEXT, names)
}

fn kb_context_block_with(template: &str, names: &[String]) -> String {
    let mut names: Vec<&str> = names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    names.sort_unstable();
    names.dedup();
    if names.is_empty() {
        return String::new();
    }
    template.replace("{names}", &names.join(", "))
}
