//! Typed attribute values and the comparison operators over them.

use std::cmp::Ordering;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::ExecError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Value {
    String {
        value: String,
    },
    Number {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
    Year {
        value: i32,
    },
    Date {
        value: NaiveDate,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    String,
    Number,
    Year,
    Date,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::String => "string",
            ValueKind::Number => "number",
            ValueKind::Year => "year",
            ValueKind::Date => "date",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl CompareOp {
    pub fn parse(s: &str) -> Option<CompareOp> {
        match s.trim() {
            "=" | "==" => Some(CompareOp::Eq),
            "!=" => Some(CompareOp::Ne),
            "<" => Some(CompareOp::Lt),
            ">" => Some(CompareOp::Gt),
            _ => None,
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Gt => ord == Ordering::Greater,
        }
    }
}

/// Treats KQA Pro's dimensionless unit `"1"` and the empty string as no unit.
pub fn normalize_unit(unit: Option<&str>) -> Option<String> {
    unit.map(str::trim)
        .filter(|u| !u.is_empty() && *u != "1")
        .map(str::to_string)
}

impl Value {
    pub fn string(s: impl Into<String>) -> Value {
        Value::String { value: s.into() }
    }

    pub fn number(value: f64, unit: Option<&str>) -> Value {
        Value::Number {
            value,
            unit: normalize_unit(unit),
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Value::String { .. } => ValueKind::String,
            Value::Number { .. } => ValueKind::Number,
            Value::Year { .. } => ValueKind::Year,
            Value::Date { .. } => ValueKind::Date,
        }
    }

    /// Whether facts holding this value are seen by a filter of `kind`.
    /// Dates also answer year filters and years answer date filters, via
    /// the year component.
    pub fn fits(&self, kind: ValueKind) -> bool {
        self.kind() == kind
            || matches!(
                (self.kind(), kind),
                (ValueKind::Date, ValueKind::Year) | (ValueKind::Year, ValueKind::Date)
            )
    }

    /// Parses argument text as a value of `kind`. Numbers may carry a unit
    /// after the first space (`5.5 metre`).
    pub fn parse_as(kind: ValueKind, text: &str) -> Option<Value> {
        let text = text.trim();
        match kind {
            ValueKind::String => Some(Value::string(text)),
            ValueKind::Number => {
                let (num, unit) = match text.split_once(' ') {
                    Some((n, u)) => (n, Some(u)),
                    None => (text, None),
                };
                num.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(|v| Value::number(v, unit))
            }
            ValueKind::Year => text.parse::<i32>().ok().map(|value| Value::Year { value }),
            ValueKind::Date => NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .ok()
                .map(|value| Value::Date { value }),
        }
    }

    fn year(&self) -> Option<i32> {
        match self {
            Value::Year { value } => Some(*value),
            Value::Date { value } => Some(value.year()),
            _ => None,
        }
    }

    /// `self op other`, with `self` the knowledge-base side.
    pub fn compare(&self, op: CompareOp, other: &Value) -> Result<bool, ExecError> {
        let ord = match (self, other) {
            (Value::String { value: a }, Value::String { value: b }) => {
                if matches!(op, CompareOp::Lt | CompareOp::Gt) {
                    return Err(ExecError::BadOperator {
                        op: format!("{op:?}"),
                        kind: ValueKind::String,
                    });
                }
                a.cmp(b)
            }
            (Value::Number { value: a, unit: ua }, Value::Number { value: b, unit: ub }) => {
                if ua != ub {
                    return Err(ExecError::UnitMismatch {
                        left: ua.clone().unwrap_or_default(),
                        right: ub.clone().unwrap_or_default(),
                    });
                }
                a.total_cmp(b)
            }
            (Value::Date { value: a }, Value::Date { value: b }) => a.cmp(b),
            (a, b) => match (a.year(), b.year()) {
                (Some(x), Some(y)) => x.cmp(&y),
                _ => {
                    return Err(ExecError::ValueKindMismatch {
                        left: a.kind(),
                        right: b.kind(),
                    })
                }
            },
        };
        Ok(op.holds(ord))
    }

    /// Total order used by SelectAmong/SelectBetween; incomparable pairs
    /// are errors.
    pub fn order(&self, other: &Value) -> Result<Ordering, ExecError> {
        if self.compare(CompareOp::Lt, other)? {
            Ok(Ordering::Less)
        } else if self.compare(CompareOp::Gt, other)? {
            Ok(Ordering::Greater)
        } else {
            Ok(Ordering::Equal)
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::String { value } => f.write_str(value),
            Value::Number { value, unit } => {
                if value.fract() == 0.0 && value.abs() < 1e15 {
                    write!(f, "{}", *value as i64)?;
                } else {
                    write!(f, "{value}")?;
                }
                if let Some(u) = unit {
                    write!(f, " {u}")?;
                }
                Ok(())
            }
            Value::Year { value } => write!(f, "{value}"),
            Value::Date { value } => write!(f, "{}", value.format("%Y-%m-%d")),
        }
    }
}
