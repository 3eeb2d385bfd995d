//! Machine-checkable requirement constraints.
//!
//! Forms: `max_words(n)`, `min_words(n)`, `must_include("s")`,
//! `must_not_include("s")`, `matches_regex("r")`, `json_parseable`,
//! `line_count_between(a, b)`. String arguments are JSON string literals.
//! A word is a whitespace-delimited token; substring checks are exact and
//! case-sensitive; lines are `\n`-separated, ignoring one trailing newline.

use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CurationError, Verdict};

#[derive(Debug, Clone)]
pub enum Constraint {
    MaxWords(u64),
    MinWords(u64),
    MustInclude(String),
    MustNotInclude(String),
    MatchesRegex(Regex),
    JsonParseable,
    LineCountBetween(u64, u64),
}

impl PartialEq for Constraint {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

fn invalid(text: &str, reason: impl fmt::Display) -> CurationError {
    CurationError::InvalidConstraint(format!("{text:?}: {reason}"))
}

impl FromStr for Constraint {
    type Err = CurationError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let t = text.trim();
        if t == "json_parseable" || t == "json_parseable()" {
            return Ok(Constraint::JsonParseable);
        }
        let (name, rest) = t.split_once('(').ok_or_else(|| invalid(text, "expected name(args)"))?;
        let args = rest.strip_suffix(')').ok_or_else(|| invalid(text, "missing closing parenthesis"))?;
        // Arguments parse as a JSON array body: numbers and string literals.
        let values: Vec<serde_json::Value> =
            serde_json::from_str(&format!("[{args}]")).map_err(|e| invalid(text, e))?;
        let count = |n: &serde_json::Value| n.as_u64().ok_or_else(|| invalid(text, "expected a non-negative integer"));
        let string = |s: &serde_json::Value| {
            s.as_str().map(String::from).ok_or_else(|| invalid(text, "expected a string literal"))
        };
        let arity = |n: usize| {
            if values.len() == n {
                Ok(())
            } else {
                Err(invalid(text, format!("expected {n} argument(s), got {}", values.len())))
            }
        };
        match name.trim() {
            "max_words" => arity(1).and_then(|_| Ok(Constraint::MaxWords(count(&values[0])?))),
            "min_words" => arity(1).and_then(|_| Ok(Constraint::MinWords(count(&values[0])?))),
            "must_include" => arity(1).and_then(|_| Ok(Constraint::MustInclude(string(&values[0])?))),
            "must_not_include" => arity(1).and_then(|_| Ok(Constraint::MustNotInclude(string(&values[0])?))),
            "matches_regex" => arity(1).and_then(|_| {
                let pattern = string(&values[0])?;
                Regex::new(&pattern).map(Constraint::MatchesRegex).map_err(|e| invalid(text, e))
            }),
            "json_parseable" => arity(0).map(|_| Constraint::JsonParseable),
            "line_count_between" => arity(2).and_then(|_| {
                let (a, b) = (count(&values[0])?, count(&values[1])?);
                if a > b {
                    return Err(invalid(text, "lower bound exceeds upper bound"));
                }
                Ok(Constraint::LineCountBetween(a, b))
            }),
            other => Err(invalid(text, format!("unknown constraint {other:?}"))),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = |s: &str| serde_json::Value::from(s).to_string();
        match self {
            Constraint::MaxWords(n) => write!(f, "max_words({n})"),
            Constraint::MinWords(n) => write!(f, "min_words({n})"),
            Constraint::MustInclude(s) => write!(f, "must_include({})", lit(s)),
            Constraint::MustNotInclude(s) => write!(f, "must_not_include({})", lit(s)),
            Constraint::MatchesRegex(r) => write!(f, "matches_regex({})", lit(r.as_str())),
            Constraint::JsonParseable => f.write_str("json_parseable"),
            Constraint::LineCountBetween(a, b) => write!(f, "line_count_between({a}, {b})"),
        }
    }
}

impl Serialize for Constraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Constraint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

pub fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

fn line_count(text: &str) -> u64 {
    if text.is_empty() {
        return 0;
    }
    text.strip_suffix('\n').unwrap_or(text).split('\n').count() as u64
}

/// Deterministic verdict of `check` on `content`.
pub fn judge_rule(content: &str, check: &Constraint) -> Verdict {
    let ok = match check {
        Constraint::MaxWords(n) => word_count(content) <= *n,
        Constraint::MinWords(n) => word_count(content) >= *n,
        Constraint::MustInclude(s) => content.contains(s.as_str()),
        Constraint::MustNotInclude(s) => !content.contains(s.as_str()),
        Constraint::MatchesRegex(r) => r.is_match(content),
        Constraint::JsonParseable => serde_json::from_str::<serde_json::Value>(content).is_ok(),
        Constraint::LineCountBetween(a, b) => (*a..=*b).contains(&line_count(content)),
    };
    Verdict::from(ok)
}
