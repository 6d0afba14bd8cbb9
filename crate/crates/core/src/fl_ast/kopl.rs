//! KoPL programs: the 27-function library, the arity table, and the three
//! textual forms used in prompts.
//!
//! KoPL text carries no dependency indices, so the tree is rebuilt with a
//! stack: each function pops as many finished subtrees as it takes program
//! inputs (oldest first) and pushes itself. A well-formed program leaves
//! exactly one subtree on the stack, rooted at the last function.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ParseError;

/// The closed KoPL function library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KoplOp {
    FindAll,
    Find,
    FilterConcept,
    FilterStr,
    FilterNum,
    FilterYear,
    FilterDate,
    QFilterStr,
    QFilterNum,
    QFilterYear,
    QFilterDate,
    Relate,
    And,
    Or,
    /// Entity-name query. Written `What` in dataset programs and
    /// `QueryName` in the function library description; both spellings parse.
    What,
    Count,
    QueryAttr,
    QueryAttrUnderCondition,
    QueryRelation,
    SelectBetween,
    SelectAmong,
    VerifyStr,
    VerifyNum,
    VerifyYear,
    VerifyDate,
    QueryAttrQualifier,
    QueryRelationQualifier,
}

impl KoplOp {
    pub const ALL: [KoplOp; 27] = [
        KoplOp::FindAll,
        KoplOp::Find,
        KoplOp::FilterConcept,
        KoplOp::FilterStr,
        KoplOp::FilterNum,
        KoplOp::FilterYear,
        KoplOp::FilterDate,
        KoplOp::QFilterStr,
        KoplOp::QFilterNum,
        KoplOp::QFilterYear,
        KoplOp::QFilterDate,
        KoplOp::Relate,
        KoplOp::And,
        KoplOp::Or,
        KoplOp::What,
        KoplOp::Count,
        KoplOp::QueryAttr,
        KoplOp::QueryAttrUnderCondition,
        KoplOp::QueryRelation,
        KoplOp::SelectBetween,
        KoplOp::SelectAmong,
        KoplOp::VerifyStr,
        KoplOp::VerifyNum,
        KoplOp::VerifyYear,
        KoplOp::VerifyDate,
        KoplOp::QueryAttrQualifier,
        KoplOp::QueryRelationQualifier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KoplOp::FindAll => "FindAll",
            KoplOp::Find => "Find",
            KoplOp::FilterConcept => "FilterConcept",
            KoplOp::FilterStr => "FilterStr",
            KoplOp::FilterNum => "FilterNum",
            KoplOp::FilterYear => "FilterYear",
            KoplOp::FilterDate => "FilterDate",
            KoplOp::QFilterStr => "QFilterStr",
            KoplOp::QFilterNum => "QFilterNum",
            KoplOp::QFilterYear => "QFilterYear",
            KoplOp::QFilterDate => "QFilterDate",
            KoplOp::Relate => "Relate",
            KoplOp::And => "And",
            KoplOp::Or => "Or",
            KoplOp::What => "What",
            KoplOp::Count => "Count",
            KoplOp::QueryAttr => "QueryAttr",
            KoplOp::QueryAttrUnderCondition => "QueryAttrUnderCondition",
            KoplOp::QueryRelation => "QueryRelation",
            KoplOp::SelectBetween => "SelectBetween",
            KoplOp::SelectAmong => "SelectAmong",
            KoplOp::VerifyStr => "VerifyStr",
            KoplOp::VerifyNum => "VerifyNum",
            KoplOp::VerifyYear => "VerifyYear",
            KoplOp::VerifyDate => "VerifyDate",
            KoplOp::QueryAttrQualifier => "QueryAttrQualifier",
            KoplOp::QueryRelationQualifier => "QueryRelationQualifier",
        }
    }

    /// Looks up a function by name. Accepts the `QueryName` and `Findall`
    /// spellings used in the function library description.
    pub fn from_name(name: &str) -> Option<KoplOp> {
        match name {
            "QueryName" => return Some(KoplOp::What),
            "Findall" => return Some(KoplOp::FindAll),
            _ => {}
        }
        KoplOp::ALL.iter().copied().find(|op| op.name() == name)
    }

    /// Number of program (subtree) inputs.
    pub fn arity(self) -> usize {
        match self {
            KoplOp::FindAll | KoplOp::Find => 0,
            KoplOp::And
            | KoplOp::Or
            | KoplOp::SelectBetween
            | KoplOp::QueryRelation
            | KoplOp::QueryRelationQualifier => 2,
            _ => 1,
        }
    }

    /// Number of textual arguments the function expects.
    pub fn text_arity(self) -> usize {
        match self {
            KoplOp::FindAll | KoplOp::And | KoplOp::Or | KoplOp::What | KoplOp::Count | KoplOp::QueryRelation => 0,
            KoplOp::Find | KoplOp::FilterConcept | KoplOp::QueryAttr | KoplOp::VerifyStr => 1,
            KoplOp::FilterStr
            | KoplOp::QFilterStr
            | KoplOp::Relate
            | KoplOp::SelectBetween
            | KoplOp::SelectAmong
            | KoplOp::VerifyNum
            | KoplOp::VerifyYear
            | KoplOp::VerifyDate
            | KoplOp::QueryRelationQualifier => 2,
            KoplOp::FilterNum
            | KoplOp::FilterYear
            | KoplOp::FilterDate
            | KoplOp::QFilterNum
            | KoplOp::QFilterYear
            | KoplOp::QFilterDate
            | KoplOp::QueryAttrUnderCondition
            | KoplOp::QueryAttrQualifier => 3,
        }
    }

    /// Argument that absorbs surplus comma-separated pieces when a
    /// dot-chain argument itself contains ", " (entity names often do).
    fn free_text_arg(self) -> usize {
        match self {
            KoplOp::FilterStr | KoplOp::QFilterStr | KoplOp::FilterNum | KoplOp::QFilterNum => 1,
            KoplOp::QueryAttrUnderCondition | KoplOp::QueryAttrQualifier => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for KoplOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KoplFunction {
    pub op: KoplOp,
    pub args: Vec<String>,
    pub deps: Vec<usize>,
}

impl KoplFunction {
    pub fn name(&self) -> &'static str {
        self.op.name()
    }
}

/// A KoPL program in post-order; the root is the last function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<KoplFunction>", into = "Vec<KoplFunction>")]
pub struct KoplProgram {
    functions: Vec<KoplFunction>,
}

impl TryFrom<Vec<KoplFunction>> for KoplProgram {
    type Error = ParseError;

    fn try_from(functions: Vec<KoplFunction>) -> Result<Self, Self::Error> {
        KoplProgram::from_functions(functions)
    }
}

impl From<KoplProgram> for Vec<KoplFunction> {
    fn from(p: KoplProgram) -> Self {
        p.functions
    }
}

/// Textual KoPL forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KoplFormat {
    /// `F(a, b).G()`
    DotChain,
    /// `F(a, b)G()`, as printed in understanding prompts.
    Compact,
    /// `F [arg] a [arg] b [func] G`, as printed in generation prompts.
    Tagged,
}

impl KoplProgram {
    /// Builds a program from (op, args) pairs, deriving dependencies by the
    /// stack convention.
    pub fn from_ops<I, S>(items: I) -> Result<KoplProgram, ParseError>
    where
        I: IntoIterator<Item = (KoplOp, Vec<S>)>,
        S: Into<String>,
    {
        let mut functions = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for (idx, (op, args)) in items.into_iter().enumerate() {
            let need = op.arity();
            if stack.len() < need {
                return Err(ParseError::ArityUnderflow {
                    function: op.name().to_string(),
                    position: idx,
                    needed: need,
                    available: stack.len(),
                });
            }
            let deps = stack.split_off(stack.len() - need);
            stack.push(idx);
            functions.push(KoplFunction {
                op,
                args: args.into_iter().map(Into::into).collect(),
                deps,
            });
        }
        if functions.is_empty() {
            return Err(ParseError::Empty);
        }
        if stack.len() != 1 {
            return Err(ParseError::DanglingSubtrees(stack.len()));
        }
        Ok(KoplProgram { functions })
    }

    /// Validates explicit dependency lists (as shipped in datasets) against
    /// the arity table and the stack convention.
    pub fn from_functions(functions: Vec<KoplFunction>) -> Result<KoplProgram, ParseError> {
        for (idx, f) in functions.iter().enumerate() {
            if f.deps.len() != f.op.arity() {
                return Err(ParseError::InvalidDependencies {
                    position: idx,
                    reason: format!("{} takes {} program inputs, got {}", f.op, f.op.arity(), f.deps.len()),
                });
            }
            if let Some(&bad) = f.deps.iter().find(|&&d| d >= idx) {
                return Err(ParseError::InvalidDependencies {
                    position: idx,
                    reason: format!("dependency {bad} does not precede the function"),
                });
            }
        }
        let rebuilt = KoplProgram::from_ops(functions.iter().map(|f| (f.op, f.args.clone())))?;
        for (idx, (given, derived)) in functions.iter().zip(&rebuilt.functions).enumerate() {
            if given.deps != derived.deps {
                return Err(ParseError::InvalidDependencies {
                    position: idx,
                    reason: format!(
                        "dependencies {:?} are not in post-order (expected {:?})",
                        given.deps, derived.deps
                    ),
                });
            }
        }
        Ok(rebuilt)
    }

    pub fn functions(&self) -> &[KoplFunction] {
        &self.functions
    }

    pub fn root_index(&self) -> usize {
        self.functions.len() - 1
    }

    pub fn root(&self) -> &KoplFunction {
        &self.functions[self.root_index()]
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Rewrites every argument with `f(op, arg_position, arg)`; the tree
    /// shape is unchanged.
    pub fn map_args(&self, mut f: impl FnMut(KoplOp, usize, &str) -> String) -> KoplProgram {
        let functions = self
            .functions
            .iter()
            .map(|func| KoplFunction {
                op: func.op,
                args: func.args.iter().enumerate().map(|(i, a)| f(func.op, i, a)).collect(),
                deps: func.deps.clone(),
            })
            .collect();
        KoplProgram { functions }
    }

    pub fn serialize(&self, format: KoplFormat) -> String {
        serialize_kopl(self, format)
    }
}

pub fn serialize_kopl(program: &KoplProgram, format: KoplFormat) -> String {
    match format {
        KoplFormat::DotChain | KoplFormat::Compact => {
            let sep = if format == KoplFormat::DotChain { "." } else { "" };
            program
                .functions
                .iter()
                .map(|f| format!("{}({})", f.op.name(), f.args.join(", ")))
                .collect::<Vec<_>>()
                .join(sep)
        }
        KoplFormat::Tagged => program
            .functions
            .iter()
            .map(|f| {
                let mut s = f.op.name().to_string();
                for a in &f.args {
                    s.push_str(" [arg] ");
                    s.push_str(a);
                }
                s
            })
            .collect::<Vec<_>>()
            .join(" [func] "),
    }
}

/// Guesses which of the textual forms `text` is written in.
pub fn detect_format(text: &str) -> KoplFormat {
    let t = text.trim();
    if t.contains("[func]") || t.contains("[arg]") || !t.contains('(') {
        KoplFormat::Tagged
    } else if t.contains(").") {
        KoplFormat::DotChain
    } else {
        KoplFormat::Compact
    }
}

/// Parses KoPL in any of the three textual forms.
pub fn parse_kopl(text: &str) -> Result<KoplProgram, ParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseError::Empty);
    }
    let calls = match detect_format(text) {
        KoplFormat::Tagged => split_tagged(text)?,
        KoplFormat::DotChain | KoplFormat::Compact => split_calls(text)?,
    };
    KoplProgram::from_ops(calls)
}

fn lookup(name: &str) -> Result<KoplOp, ParseError> {
    KoplOp::from_name(name).ok_or_else(|| ParseError::UnknownFunction(name.to_string()))
}

fn split_tagged(text: &str) -> Result<Vec<(KoplOp, Vec<String>)>, ParseError> {
    text.split("[func]")
        .map(|chunk| {
            let mut parts = chunk.split("[arg]").map(str::trim);
            let name = parts.next().unwrap_or_default();
            let op = lookup(name)?;
            Ok((op, parts.map(str::to_string).collect()))
        })
        .collect()
}

/// Splits `F(a, b).G()` / `F(a, b)G()` into calls. Parentheses inside an
/// argument (e.g. `Pocahontas (film)`) are allowed as long as they balance.
fn split_calls(text: &str) -> Result<Vec<(KoplOp, Vec<String>)>, ParseError> {
    let mut calls = Vec::new();
    let mut rest = text;
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        let open = rest.find('(').ok_or(ParseError::UnbalancedParens)?;
        let name = rest[..open].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(ParseError::UnknownFunction(name.to_string()));
        }
        let op = lookup(name)?;
        let mut depth = 0usize;
        let mut close = None;
        for (i, c) in rest[open..].char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(open + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let close = close.ok_or(ParseError::UnbalancedParens)?;
        let inner = &rest[open + 1..close];
        calls.push((op, split_args(op, inner)));
        rest = rest[close + 1..].trim_start();
        if let Some(r) = rest.strip_prefix('.') {
            rest = r;
        } else if rest.starts_with(')') {
            return Err(ParseError::UnbalancedParens);
        }
    }
    Ok(calls)
}

fn split_args(op: KoplOp, inner: &str) -> Vec<String> {
    let inner = inner.trim();
    if inner.is_empty() {
        return Vec::new();
    }
    let mut parts: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
    let want = op.text_arity();
    if want > 0 && parts.len() > want {
        let keep = op.free_text_arg();
        let surplus = parts.len() - want;
        let merged = parts[keep..=keep + surplus].join(", ");
        parts.splice(keep..=keep + surplus, std::iter::once(merged));
    }
    parts
}
